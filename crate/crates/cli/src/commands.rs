use std::fs;
use std::path::Path;

use serde_json::json;

use riskcal::conditional::{
    attach_cone_verdicts, cone_decompose_with, cone_system, dual_vertices, multiperiod_gaps,
    tc_gap, verify_cone_witness, ConditionalUtility,
};
use riskcal::lift::{achieved_identity_residual, additivity_probe};
use riskcal::lp::certificate_residuals;
use riskcal::probes::{crafted_probes, random_f1_probes, random_probes};
use riskcal::schema::{LoadedSpace, SpaceFile, UtilityFile};
use riskcal::utility::{is_commonotone_pair, relevance_witness};
use riskcal::{build_uniform_grid, CoherentUtility, Error, RandomVariable, Result};

use crate::report::{emit, Report, Table};
use crate::{Command, Demo, RunConfig};

const FOUR_OUTCOME: &str = include_str!("../../../data/four_outcome.json");
const EIGHT_OUTCOME: &str = include_str!("../../../data/eight_outcome.json");
const TWELVE_OUTCOME: &str = include_str!("../../../data/twelve_outcome.json");
const PRODUCT_GRID: &str = include_str!("../../../data/product_grid.json");

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn space_file(config: &RunConfig) -> Result<SpaceFile> {
    let path = config
        .space
        .as_ref()
        .ok_or_else(|| Error::Schema("--space is required".into()))?;
    SpaceFile::parse(&read(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn utility_for(config: &RunConfig, file: &SpaceFile) -> Result<CoherentUtility> {
    if let Some(path) = &config.utility {
        let parsed = UtilityFile::parse(&read(path)?)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        return parsed.utility.build();
    }
    file.utility()?.ok_or_else(|| {
        Error::Schema("no utility: pass --utility or add `utility` to the space file".into())
    })
}

/// File probes, then `--x` probes, then (optionally) crafted probes, then
/// `--probes` random probes in `[−1, 1]`.
fn probe_list(
    config: &RunConfig,
    file: &SpaceFile,
    loaded: &LoadedSpace,
    crafted: bool,
) -> Result<Vec<RandomVariable>> {
    let n = loaded.space.len();
    let mut probes = file.probe_vectors()?;
    for x in &config.x {
        probes.push(RandomVariable::new(x.0.clone())?);
    }
    if crafted {
        probes.extend(crafted_probes(&loaded.space, &loaded.filtration));
    }
    probes.extend(random_probes(n, config.probes, config.seed, -1.0, 1.0));
    for p in &probes {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
    }
    if probes.is_empty() {
        return Err(Error::Schema(
            "no probes: add `probes`, pass --x, or set --probes".into(),
        ));
    }
    Ok(probes)
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn run(config: &RunConfig) -> Result<u8> {
    match config.command {
        Command::Validate => validate(config),
        Command::Eval => eval(config),
        Command::Lift => lift(config),
        Command::TcCheck => tc_check(config),
        Command::ConeCheck => cone_check(config),
        Command::Demo {
            which: Demo::Incompatibility,
        } => demo_incompatibility(config),
        Command::Demo {
            which: Demo::Multiperiod,
        } => demo_multiperiod(config),
    }
}

fn finish(config: &RunConfig, result: serde_json::Value, table: &Table) -> Result<()> {
    let report = Report::new(config, result);
    emit(config, &report, table).map_err(|e| Error::Schema(format!("writing report: {e}")))
}

fn validate(config: &RunConfig) -> Result<u8> {
    let file = space_file(config)?;
    let report = file.validation_report()?;
    let mut table = Table::new(vec!["violation"]);
    for v in &report.violations {
        table.push(vec![v.to_string()]);
    }
    finish(
        config,
        serde_json::to_value(&report).expect("serializable"),
        &table,
    )?;
    if report.is_valid() {
        Ok(0)
    } else {
        eprintln!("{report}");
        Ok(2)
    }
}

fn eval(config: &RunConfig) -> Result<u8> {
    let file = space_file(config)?;
    let loaded = file.load()?;
    let u = utility_for(config, &file)?;
    let probes = probe_list(config, &file, &loaded, false)?;
    let name = u.name();
    let mut table = Table::new(vec!["id", "variant", "value"]);
    let mut rows = Vec::new();
    for (id, x) in probes.iter().enumerate() {
        let value = u.eval(x, &loaded.space)?;
        table.push(vec![id.to_string(), name.clone(), fmt(value)]);
        rows.push(json!({"id": id, "value": value}));
    }
    let witness = relevance_witness(&u, &loaded.space)?;
    let result = json!({
        "utility": name,
        "outcomes": loaded.space.len(),
        "relevant": witness.is_none(),
        "relevance_witness": witness,
        "values": rows,
    });
    finish(config, result, &table)?;
    Ok(0)
}

fn lift(config: &RunConfig) -> Result<u8> {
    let file = space_file(config)?;
    let loaded = file.load()?;
    let u = utility_for(config, &file)?;
    let n = loaded.space.len();
    let def = file.lift.as_ref();
    let grid_n = config.grid_n.or(def.map(|s| s.grid_n)).ok_or_else(|| {
        Error::Schema("no grid resolution: pass --grid-n or add `lift.grid_n`".into())
    })?;
    let f = config
        .f
        .clone()
        .map(|v| v.0)
        .or(def.map(|s| s.f.clone()))
        .ok_or_else(|| Error::Schema("missing f".into()))?;
    let g = config
        .g
        .clone()
        .map(|v| v.0)
        .or(def.map(|s| s.g.clone()))
        .ok_or_else(|| Error::Schema("missing g".into()))?;
    let (f, g) = (RandomVariable::new(f)?, RandomVariable::new(g)?);
    for v in [&f, &g] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let grid = build_uniform_grid(&loaded.space, &loaded.filtration, grid_n)?;
    let cu = ConditionalUtility::new(u, loaded.space, loaded.filtration)?;
    let probe = additivity_probe(&cu, &grid, &f, &g)?;
    let (pair, diag) = (&probe.pair, &probe.diagnostics);
    let residual = achieved_identity_residual(&cu, pair, diag)?;
    let commonotone = is_commonotone_pair(&pair.xi, &pair.eta, cu.space())?;

    let mut table = Table::new(vec![
        "block",
        "x1",
        "x2",
        "y1",
        "y2",
        "d",
        "lambda_target",
        "lambda_achieved",
        "level",
    ]);
    for b in &diag.geometry {
        table.push(vec![
            b.block.to_string(),
            fmt(b.x_point.x),
            fmt(b.x_point.y),
            fmt(b.y_point.x),
            fmt(b.y_point.y),
            fmt(b.d),
            fmt(b.lambda_target),
            fmt(b.lambda_achieved),
            b.level.to_string(),
        ]);
    }
    let result = json!({
        "utility": cu.base().name(),
        "grid_n": grid_n,
        "pair": pair,
        "commonotone": commonotone.commonotone,
        "diagnostics": diag,
        "achieved_identity_residual": residual,
        "lifted_defect": probe.lifted_defect,
        "f1_defect": probe.f1_defect,
        "snap_bound": probe.snap_bound,
    });
    finish(config, result, &table)?;
    Ok(0)
}

fn tc_check(config: &RunConfig) -> Result<u8> {
    let file = space_file(config)?;
    let loaded = file.load()?;
    let u = utility_for(config, &file)?;
    let probes = probe_list(config, &file, &loaded, true)?;
    let cu = ConditionalUtility::new(u, loaded.space, loaded.filtration)?;
    let mut report = tc_gap(&cu, &probes)?;
    let cone_note = match attach_cone_verdicts(&mut report, &cu, &probes) {
        Ok(()) => None,
        Err(e @ Error::SpaceTooLarge { .. }) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let consistent = report.is_consistent(config.tolerance);
    let mut table = Table::new(vec!["id", "u02", "recomposed", "gap", "cone_feasible"]);
    for row in &report.rows {
        let verdict = report
            .cone_verdicts
            .get(row.id)
            .map_or(String::new(), |v| v.feasible.to_string());
        table.push(vec![
            row.id.to_string(),
            fmt(row.u02),
            fmt(row.recomposed),
            fmt(row.gap),
            verdict,
        ]);
    }
    let result = json!({
        "utility": cu.base().name(),
        "consistent": consistent,
        "cone_verdicts_skipped": cone_note,
        "report": report,
    });
    finish(config, result, &table)?;
    Ok(if consistent { 0 } else { 1 })
}

fn cone_check(config: &RunConfig) -> Result<u8> {
    let file = space_file(config)?;
    let loaded = file.load()?;
    let u = utility_for(config, &file)?;
    let probes = probe_list(config, &file, &loaded, false)?;
    let cu = ConditionalUtility::new(u, loaded.space, loaded.filtration)?;
    let vertices = dual_vertices(&cu)?;
    let mut table = Table::new(vec!["id", "feasible", "check"]);
    let mut rows = Vec::new();
    for (id, x) in probes.iter().enumerate() {
        let centered = x.shift(-cu.unconditional(x)?);
        let d = cone_decompose_with(&cu, &centered, &vertices)?;
        let check = match (&d.witness, &d.certificate) {
            (Some(w), _) => {
                serde_json::to_value(verify_cone_witness(&cu, &centered, w)?).expect("serializable")
            }
            (None, Some(cert)) => {
                let (a, b) = cone_system(&cu, &centered, &vertices);
                let (residual, wb) = certificate_residuals(&a, &b, cert);
                json!({"certificate_residual": residual, "certificate_rhs": wb})
            }
            (None, None) => serde_json::Value::Null,
        };
        table.push(vec![
            id.to_string(),
            d.feasible.to_string(),
            check.to_string(),
        ]);
        rows.push(json!({"id": id, "centered": centered, "feasible": d.feasible, "check": check}));
    }
    let result = json!({
        "utility": cu.base().name(),
        "vertices": vertices.len(),
        "probes": rows,
    });
    finish(config, result, &table)?;
    Ok(0)
}

fn demo_incompatibility(config: &RunConfig) -> Result<u8> {
    let mut table = Table::new(vec!["exhibit", "quantity", "value"]);

    // (a) recomposition gap under es(1/2)
    let file = SpaceFile::parse(FOUR_OUTCOME)?;
    let loaded = file.load()?;
    let base = file.utility()?.expect("shipped file has a utility");
    // the exhibit uses the shipped probe and the crafted family; random
    // probes live on a different scale and are reported on their own
    let mut probes = file.probe_vectors()?;
    probes.extend(crafted_probes(&loaded.space, &loaded.filtration));
    let random = random_probes(loaded.space.len(), config.probes, config.seed, -1.0, 1.0);
    let cu = ConditionalUtility::new(base, loaded.space, loaded.filtration)?;
    let mut gap = tc_gap(&cu, &probes)?;
    attach_cone_verdicts(&mut gap, &cu, &probes[..1])?;
    let random_gap = if random.is_empty() {
        0.0
    } else {
        tc_gap(&cu, &random)?.max_gap
    };
    table.push(vec!["tc_gap".into(), "max_gap".into(), fmt(gap.max_gap)]);
    table.push(vec![
        "tc_gap".into(),
        "random_max_gap".into(),
        fmt(random_gap),
    ]);
    table.push(vec![
        "tc_gap".into(),
        "witness".into(),
        format!("{:?}", gap.witness.values()),
    ]);
    table.push(vec![
        "tc_gap".into(),
        "witness_cone_feasible".into(),
        gap.cone_verdicts[0].feasible.to_string(),
    ]);

    // (b) lifted additivity defect
    let file = SpaceFile::parse(TWELVE_OUTCOME)?;
    let loaded = file.load()?;
    let def = file.lift.clone().expect("shipped file has a lift");
    let grid = build_uniform_grid(&loaded.space, &loaded.filtration, def.grid_n)?;
    let cu12 = ConditionalUtility::new(
        file.utility()?.expect("utility"),
        loaded.space,
        loaded.filtration,
    )?;
    let probe = additivity_probe(
        &cu12,
        &grid,
        &RandomVariable::new(def.f.clone())?,
        &RandomVariable::new(def.g.clone())?,
    )?;
    table.push(vec![
        "additivity".into(),
        "lifted_defect".into(),
        fmt(probe.lifted_defect),
    ]);
    table.push(vec![
        "additivity".into(),
        "f1_defect".into(),
        fmt(probe.f1_defect),
    ]);
    table.push(vec![
        "additivity".into(),
        "commonotone".into(),
        probe.commonotone.to_string(),
    ]);

    // (c) product example: linear on F1, not on F2
    let file = SpaceFile::parse(PRODUCT_GRID)?;
    let loaded = file.load()?;
    let u = file.utility()?.expect("utility");
    let (rows, cols) = match &u {
        CoherentUtility::ProductExample(g) => (g.rows, g.cols),
        _ => unreachable!("shipped product file"),
    };
    let count = config.probes.min(50);
    let mut max_f1_error: f64 = 0.0;
    for x in random_f1_probes(&loaded.filtration, count, config.seed, 0.0, 1.0) {
        max_f1_error =
            max_f1_error.max((u.eval(&x, &loaded.space)? - loaded.space.expectation(&x)).abs());
    }
    let split: Vec<f64> = (0..rows * cols)
        .map(|i| if i % cols < cols / 2 { 4.0 } else { 0.0 })
        .collect();
    let split = RandomVariable::new(split)?;
    let split_value = u.eval(&split, &loaded.space)?;
    let split_mean = loaded.space.expectation(&split);
    let tolerance = 2.0 / rows as f64;
    table.push(vec![
        "product".into(),
        "f1_max_error".into(),
        fmt(max_f1_error),
    ]);
    table.push(vec!["product".into(), "f2_value".into(), fmt(split_value)]);
    table.push(vec!["product".into(), "f2_mean".into(), fmt(split_mean)]);

    let result = json!({
        "tc_gap": {
            "max_gap": gap.max_gap,
            "witness": gap.witness,
            "witness_id": gap.witness_id,
            "witness_cone_feasible": gap.cone_verdicts[0].feasible,
            "probes": gap.rows.len(),
            "random_probes": random.len(),
            "random_max_gap": random_gap,
        },
        "additivity": {
            "lifted_defect": probe.lifted_defect,
            "f1_defect": probe.f1_defect,
            "commonotone": probe.commonotone,
            "u_xi": probe.u_xi,
            "u_eta": probe.u_eta,
            "u_sum": probe.u_sum,
            "xi": probe.pair.xi,
            "eta": probe.pair.eta,
        },
        "product": {
            "rows": rows,
            "cols": cols,
            "f1_probes": count,
            "f1_max_error": max_f1_error,
            "f1_tolerance": tolerance,
            "f2_value": split_value,
            "f2_mean": split_mean,
            "f2_deviation": (split_value - split_mean).abs(),
        },
    });
    finish(config, result, &table)?;
    Ok(0)
}

fn demo_multiperiod(config: &RunConfig) -> Result<u8> {
    let file = SpaceFile::parse(EIGHT_OUTCOME)?;
    let loaded = file.load()?;
    let levels = file.level_partitions(loaded.space.len())?;
    let bases = match &config.utility {
        Some(_) => vec![utility_for(config, &file)?],
        None => vec![CoherentUtility::expectation(), CoherentUtility::es(1, 2)?],
    };
    let mut probes = crafted_probes(&loaded.space, &loaded.filtration);
    probes.extend(random_probes(
        loaded.space.len(),
        config.probes,
        config.seed,
        -1.0,
        1.0,
    ));
    let mut table = Table::new(vec!["utility", "step", "max_gap", "witness_id"]);
    let mut out = Vec::new();
    for base in &bases {
        let report = multiperiod_gaps(base, &loaded.space, &levels, &probes)?;
        for s in &report.steps {
            table.push(vec![
                base.name(),
                s.step.to_string(),
                fmt(s.max_gap),
                s.witness_id.to_string(),
            ]);
        }
        out.push(json!({"utility": base.name(), "report": report}));
    }
    let result = json!({
        "levels": levels.iter().map(|p| p.blocks().to_vec()).collect::<Vec<_>>(),
        "probes": probes.len(),
        "audits": out,
    });
    finish(config, result, &table)?;
    Ok(0)
}
