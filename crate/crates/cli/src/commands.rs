use std::path::{Path, PathBuf};

use biphoton::coincidence::{
    coincidence_map, expected_column_joint, mass_region, pearson_samples, read_frames_file, synth_frames,
    write_frames, Reduction,
};
use biphoton::dispersion::TransverseMomentum;
use biphoton::entanglement::{evaluate_ef, scan, EfReport, ScanParameter};
use biphoton::fields::{
    argmax, averaged_joint_x, build_amplitude, conditional_position, count_local_maxima, momentum_pdf,
    position_pdf, radial_profile, singles, Distribution,
};
use biphoton::{collinear_angle, CrystalKind, SpdcSource};
use serde_json::json;

use crate::cli::{Cli, Command, FramesCommand, ReductionArg, ScanArg, SimBasis, Slice};
use crate::config::{CrystalKindName, Format, Resolved, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{atomic_write, atomic_write_bytes, write_grid, write_table, Grid, GridAxis};
use crate::units::{parse_list, Dimension, Length};

/// Builds the configuration for `cli` and runs its command.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.global.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.global.overrides())?;
    let scan_values = match &cli.command {
        Command::Scan { parameter, values } => {
            let values = scan_values(*parameter, values.as_deref())?;
            if *parameter == ScanArg::D {
                config.crystal.kind = CrystalKindName::Double;
                config.crystal.gap.get_or_insert(Length(values[0]));
            }
            values
        }
        _ => Vec::new(),
    };
    let cfg = config.resolve()?;
    log::info!("config fingerprint {}", cfg.fingerprint);
    match &cli.command {
        Command::CollinearAngle => collinear(&cfg),
        Command::PhasematchMap { slice } => phasematch_map(&cfg, *slice),
        Command::Simulate { basis, amplitude } => simulate(&cfg, *basis, *amplitude),
        Command::Conditional { idler_x, idler_y } => conditional(&cfg, (idler_x.si(), idler_y.si())),
        Command::Singles => singles_cmd(&cfg),
        Command::Ef => ef(&cfg),
        Command::Scan { parameter, .. } => scan_cmd(&cfg, *parameter, &scan_values),
        Command::Frames { action } => match action {
            FramesCommand::Synth { output } => frames_synth(&cfg, output.as_deref()),
            FramesCommand::Coincide {
                input,
                reduction,
                pixel,
                compare,
            } => frames_coincide(&cfg, input, *reduction, pixel.as_deref(), *compare),
        },
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn collinear(cfg: &Resolved) -> Result<()> {
    let theta = collinear_angle(&cfg.model, cfg.pump.lambda_p, cfg.lambda_s)?;
    println!("{:.6} deg", theta.to_degrees());
    Ok(())
}

fn phasematch_map(cfg: &Resolved, slice: Slice) -> Result<()> {
    let source = cfg.source()?;
    let grid = cfg.grid(&source)?;
    let n = grid.n();
    let q = grid.axis.momenta();
    let mut dk = vec![0.0; n * n];
    let mut phi = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (qs, qi) = match slice {
                Slice::Signal => (
                    TransverseMomentum::new(q[c], q[r]),
                    TransverseMomentum::new(-q[c], -q[r]),
                ),
                Slice::XPair => (
                    TransverseMomentum::new(q[c], 0.0),
                    TransverseMomentum::new(q[r], 0.0),
                ),
            };
            dk[r * n + c] = source.delta_kz(qs, qi)?;
            phi[r * n + c] = source.phi(qs, qi)?.norm();
        }
    }
    let (row, col) = match slice {
        Slice::Signal => ("q_sy", "q_sx"),
        Slice::XPair => ("q_ix", "q_sx"),
    };
    let axes = vec![
        GridAxis::centered(row, n, grid.dq(), "rad/m"),
        GridAxis::centered(col, n, grid.dq(), "rad/m"),
    ];
    let meta = json!({"slice": format!("{slice:?}").to_lowercase()});
    let mut written = write_grid(
        &Grid::new(axes.clone(), dk, &cfg.fingerprint)?.with_meta(meta.clone()),
        &cfg.out_dir,
        "phasematch_delta_kz",
        &cfg.formats,
    )?;
    written.extend(write_grid(
        &Grid::new(axes, phi, &cfg.fingerprint)?.with_meta(meta),
        &cfg.out_dir,
        "phasematch_phi",
        &cfg.formats,
    )?);
    report(&written);
    Ok(())
}

fn position_distribution(cfg: &Resolved, source: &SpdcSource) -> Result<Distribution> {
    let grid = cfg.grid(source)?;
    let amp = build_amplitude(&grid, source, cfg.amplitude)?;
    Ok(position_pdf(&amp.propagate(cfg.z)?.to_position()?)?)
}

fn meta(cfg: &Resolved) -> serde_json::Value {
    json!({"z": cfg.z, "theta_p": cfg.setup.theta_p, "n": cfg.n})
}

fn simulate(cfg: &Resolved, basis: SimBasis, with_amplitude: bool) -> Result<()> {
    let source = cfg.source()?;
    let grid = cfg.grid(&source)?;
    let amp = build_amplitude(&grid, &source, cfg.amplitude)?;
    let (stem, amp) = match basis {
        SimBasis::Mom => ("momentum", amp),
        SimBasis::Pos => ("position", amp.propagate(cfg.z)?.to_position()?),
    };
    let mut written = Vec::new();
    if with_amplitude && cfg.wants(Format::Grd1) {
        let g = Grid::from_amplitude(&amp, &cfg.fingerprint)?.with_meta(meta(cfg));
        written.extend(write_grid(
            &g,
            &cfg.out_dir,
            &format!("{stem}_amplitude"),
            &[Format::Grd1],
        )?);
    }
    let dist = match basis {
        SimBasis::Mom => momentum_pdf(&amp)?,
        SimBasis::Pos => position_pdf(&amp)?,
    };
    drop(amp);
    let out = |d: &Distribution, suffix: &str| -> Result<Vec<PathBuf>> {
        let g = Grid::from_distribution(d, &cfg.fingerprint)?.with_meta(meta(cfg));
        write_grid(&g, &cfg.out_dir, &format!("{stem}_{suffix}"), &cfg.formats)
    };
    written.extend(out(&dist, "4d")?);
    written.extend(out(&averaged_joint_x(&dist)?, "joint_x")?);
    written.extend(out(&singles(&dist)?, "singles")?);
    report(&written);
    Ok(())
}

fn radial_table(cfg: &Resolved, dist: &Distribution, name: &str) -> Result<(Vec<f64>, PathBuf)> {
    let profile = radial_profile(dist)?;
    let dx = dist.axes()[0].bin_width;
    let rows: Vec<Vec<String>> = profile
        .iter()
        .enumerate()
        .map(|(r, v)| vec![r.to_string(), format!("{:e}", r as f64 * dx), format!("{v:e}")])
        .collect();
    let path = cfg.out_dir.join(format!("{name}_radial.csv"));
    write_table(&path, &cfg.fingerprint, &["r_index", "r_m", "mean"], &rows)?;
    Ok((profile, path))
}

fn conditional(cfg: &Resolved, idler: (f64, f64)) -> Result<()> {
    let source = cfg.source()?;
    let pos = position_distribution(cfg, &source)?;
    let cond = conditional_position(&pos, idler)?;
    let g = Grid::from_distribution(&cond, &cfg.fingerprint)?
        .with_meta(json!({"z": cfg.z, "theta_p": cfg.setup.theta_p, "idler": [idler.0, idler.1]}));
    let mut written = write_grid(&g, &cfg.out_dir, "conditional", &cfg.formats)?;
    let (profile, path) = radial_table(cfg, &cond, "conditional")?;
    written.push(path);
    report(&written);
    println!(
        "radial maximum at r = {} bins, {} local maxima",
        argmax(&profile),
        count_local_maxima(&profile)
    );
    Ok(())
}

fn singles_cmd(cfg: &Resolved) -> Result<()> {
    let source = cfg.source()?;
    let pos = position_distribution(cfg, &source)?;
    let s = singles(&pos)?;
    let g = Grid::from_distribution(&s, &cfg.fingerprint)?.with_meta(meta(cfg));
    let mut written = write_grid(&g, &cfg.out_dir, "singles", &cfg.formats)?;
    written.push(radial_table(cfg, &s, "singles")?.1);
    report(&written);
    Ok(())
}

fn ef(cfg: &Resolved) -> Result<()> {
    let source = cfg.source()?;
    let mut r = evaluate_ef(&source, &cfg.entanglement, &[cfg.z])?.remove(0);
    r.fingerprint = Some(cfg.fingerprint.clone());
    let path = cfg.out_dir.join("ef.json");
    let body = json!({"z": cfg.z, "theta_p": cfg.setup.theta_p, "report": r});
    let text = serde_json::to_string_pretty(&body).map_err(biphoton::Error::from)?;
    atomic_write_bytes(&path, format!("{text}\n").as_bytes())?;
    report(&[path]);
    println!(
        "ef_min = {:.6} ebits (H(X_s|X_i) = {:.6}, H(K_s|K_i) = {:.6}, M = {})",
        r.ef_min, r.h_pos_conditional, r.h_mom_conditional, r.m
    );
    Ok(())
}

/// Default scan points: z from 0 to 40 mm in 2.5 mm steps, theta_p at
/// 32.90..32.98 deg, gaps of 2, 4 and 6 mm.
pub fn scan_values(parameter: ScanArg, given: Option<&str>) -> Result<Vec<f64>> {
    let dim = match parameter {
        ScanArg::Theta => Dimension::Angle,
        ScanArg::Z | ScanArg::D => Dimension::Length,
    };
    let values = match given {
        Some(text) => parse_list(text, dim).map_err(|e| CliError::Config(format!("--values: {e}")))?,
        None => match parameter {
            ScanArg::Z => (0..=16).map(|i| i as f64 * 2.5e-3).collect(),
            ScanArg::Theta => [32.90f64, 32.92, 32.94, 32.96, 32.98]
                .iter()
                .map(|d| d.to_radians())
                .collect(),
            ScanArg::D => vec![2e-3, 4e-3, 6e-3],
        },
    };
    if values.is_empty() {
        return Err(CliError::Config("--values: no values given".into()));
    }
    Ok(values)
}

fn scan_cmd(cfg: &Resolved, parameter: ScanArg, values: &[f64]) -> Result<()> {
    let (param, column, unit, scale) = match parameter {
        ScanArg::Z => (ScanParameter::Z, "z_mm", "mm", 1e3),
        ScanArg::Theta => (
            ScanParameter::Theta,
            "theta_deg",
            "deg",
            180.0 / std::f64::consts::PI,
        ),
        ScanArg::D => (ScanParameter::D, "d_mm", "mm", 1e3),
    };
    if parameter == ScanArg::D && !matches!(cfg.setup.kind, CrystalKind::Double { .. }) {
        return Err(CliError::Config(
            "scan d needs a double-crystal configuration".into(),
        ));
    }
    let points = scan(&cfg.scenario(), &cfg.entanglement, param, values);
    let mut rows = Vec::with_capacity(points.len());
    let mut failed = 0;
    for p in &points {
        let shown = p.value * scale;
        match &p.outcome {
            Ok(r) => {
                println!("{shown:>10.4} {unit}  ef_min {:>9.5}", r.ef_min);
                rows.push(scan_row(shown, Some(r), "ok", ""));
            }
            Err(e) => {
                failed += 1;
                println!("{shown:>10.4} {unit}  {}: {}", e.category, e.message);
                rows.push(scan_row(shown, None, &e.category, &e.message));
            }
        }
    }
    let path = cfg
        .out_dir
        .join(format!("scan_{}.csv", column.split('_').next().unwrap()));
    write_table(
        &path,
        &cfg.fingerprint,
        &[
            column,
            "ef_min",
            "h_pos_conditional",
            "h_mom_conditional",
            "dimension_bits",
            "status",
            "message",
        ],
        &rows,
    )?;
    report(&[path]);
    if failed == points.len() {
        let e = points[0].outcome.as_ref().unwrap_err();
        return Err(CliError::Config(format!(
            "every scan point failed; first: {}",
            e.message
        )));
    }
    Ok(())
}

fn scan_row(value: f64, r: Option<&EfReport>, status: &str, message: &str) -> Vec<String> {
    let num = |f: fn(&EfReport) -> f64| r.map_or(String::new(), |r| format!("{:e}", f(r)));
    vec![
        format!("{value:.6}"),
        num(|r| r.ef_min),
        num(|r| r.h_pos_conditional),
        num(|r| r.h_mom_conditional),
        num(|r| r.dimension_bits),
        status.to_string(),
        format!("\"{}\"", message.replace('"', "'")),
    ]
}

fn frames_synth(cfg: &Resolved, output: Option<&Path>) -> Result<()> {
    let source = cfg.source()?;
    let pos = position_distribution(cfg, &source)?;
    let mut stack = synth_frames(&pos, &cfg.detector, cfg.mu_pairs, cfg.n_frames, cfg.seed)?;
    stack.fingerprint = Some(cfg.fingerprint.clone());
    let path = output.map_or_else(|| cfg.out_dir.join("frames.frm"), Path::to_path_buf);
    atomic_write(&path, |f| Ok(write_frames(&stack, f)?))?;
    report(&[path]);
    println!(
        "{} frames, {:.4} counts per pixel per frame",
        stack.n_frames(),
        stack.mean_counts_per_pixel()
    );
    Ok(())
}

fn parse_pixel(text: Option<&str>) -> Result<(usize, usize)> {
    let text = text.ok_or_else(|| CliError::Config("--reduction pixel needs --pixel column,row".into()))?;
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [c, r] => match (c.parse(), r.parse()) {
            (Ok(c), Ok(r)) => Ok((c, r)),
            _ => Err(CliError::Config(format!("--pixel: `{text}` is not two indices"))),
        },
        _ => Err(CliError::Config(format!(
            "--pixel: expected column,row, got `{text}`"
        ))),
    }
}

fn frames_coincide(
    cfg: &Resolved,
    input: &Path,
    reduction: ReductionArg,
    pixel: Option<&str>,
    compare: bool,
) -> Result<()> {
    let stack = read_frames_file(input)?;
    let (red, stem, names) = match reduction {
        ReductionArg::Columns => (Reduction::ColumnPairs, "coincidence_columns", ["x_a", "x_b"]),
        ReductionArg::Pixel => {
            let (column, row) = parse_pixel(pixel)?;
            (
                Reduction::ConditionalRow { column, row },
                "coincidence_pixel",
                ["row", "column"],
            )
        }
    };
    let map = coincidence_map(&stack, red)?;
    let axes = vec![
        GridAxis::index(names[0], map.rows, "px"),
        GridAxis::index(names[1], map.cols, "px"),
    ];
    let meta = json!({
        "source": input.display().to_string(),
        "source_fingerprint": stack.fingerprint,
        "n_frames": map.n_frames,
        "reduction": red,
    });
    let g = Grid::new(axes.clone(), map.values.clone(), &cfg.fingerprint)?.with_meta(meta.clone());
    let mut written = write_grid(&g, &cfg.out_dir, stem, &cfg.formats)?;
    let se = Grid::new(axes.clone(), map.std_error.clone(), &cfg.fingerprint)?.with_meta(meta);
    written.extend(write_grid(
        &se,
        &cfg.out_dir,
        &format!("{stem}_se"),
        &[Format::Grd1],
    )?);

    if compare {
        if red != Reduction::ColumnPairs {
            return Err(CliError::Config("--compare needs --reduction columns".into()));
        }
        if stack.detector != cfg.detector {
            return Err(CliError::Config(
                "the frame stack was recorded with a different detector".into(),
            ));
        }
        let source = cfg.source()?;
        let pos = position_distribution(cfg, &source)?;
        let expected = expected_column_joint(&pos, &cfg.detector)?;
        let region = mass_region(&expected, 0.95);
        let a: Vec<f64> = region.iter().map(|&k| map.values[k]).collect();
        let b: Vec<f64> = region.iter().map(|&k| expected[k]).collect();
        let eg = Grid::new(axes, expected.clone(), &cfg.fingerprint)?.with_meta(meta_for_expected(cfg));
        written.extend(write_grid(
            &eg,
            &cfg.out_dir,
            "coincidence_expected",
            &cfg.formats,
        )?);
        println!(
            "pearson {:.4} over the 95% mass region ({} cells)",
            pearson_samples(&a, &b),
            region.len()
        );
    }
    report(&written);
    Ok(())
}

fn meta_for_expected(cfg: &Resolved) -> serde_json::Value {
    json!({"z": cfg.z, "theta_p": cfg.setup.theta_p, "mu_pairs": cfg.mu_pairs})
}
