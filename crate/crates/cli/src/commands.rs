//! Subcommand bodies. Each returns the process exit status on success.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use antibunch::analysis::{fit_fringe, schwarz_report, FitResult, ViolationInput, ViolationReport};
use antibunch::experiment::{classical_map, detected_map, scan_map, Figure};
use antibunch::geometry::{default_geometry, load_config, ExperimentGeometry};
use antibunch::montecarlo::{ClassicalEnsembleSpec, EnsembleKind, RateModel, ScanMode, ScanPlan, ScanResult};
use antibunch::textio::file_kind;
use antibunch::wave::CorrelationMap;

use crate::plot::{render, Marker, Panel, Series};
use crate::{ClassicalArgs, FitArgs, ReportArgs, ScanArgs};

/// `report` exit status when no input violates the bound.
pub const NO_VIOLATION: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn geometry(config: Option<&Path>) -> Result<ExperimentGeometry> {
    let Some(path) = config else {
        return Ok(default_geometry());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    load_config(&text).map_err(|e| match e.line() {
        Some(line) => CliError::usage(format!("{}:{line}: {e}", path.display())),
        None => CliError::usage(format!("{}: {e}", path.display())),
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn custom_plan(a: &ScanArgs) -> Result<ScanPlan> {
    let protocol: ScanMode = a
        .protocol
        .as_deref()
        .ok_or_else(|| CliError::usage("--mode custom needs --protocol"))?
        .parse()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let (Some(start), Some(stop), Some(step)) = (a.start_mm, a.stop_mm, a.step_mm) else {
        return Err(CliError::usage("--mode custom needs --start-mm, --stop-mm and --step-mm"));
    };
    if !(step > 0.0) || !(stop > start) {
        return Err(CliError::usage("custom scan needs --stop-mm > --start-mm and --step-mm > 0"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let positions = (0..n).map(|i| (start + i as f64 * step) * 1e-3).collect();
    ScanPlan::new(protocol, a.fixed_mm.unwrap_or(0.0) * 1e-3, positions, a.dwell, a.seed)
        .map_err(|e| CliError::usage(e.to_string()))
}

pub fn scan(a: &ScanArgs) -> Result<u8> {
    let g = geometry(a.common.config.as_deref())?;
    let custom_flags = a.protocol.is_some()
        || a.fixed_mm.is_some()
        || a.start_mm.is_some()
        || a.stop_mm.is_some()
        || a.step_mm.is_some();
    let (plan, stem) = if a.mode == "custom" {
        let plan = custom_plan(a)?;
        let stem = format!("custom_{}_seed{}", plan.mode(), a.seed);
        (plan, stem)
    } else {
        let fig: Figure = a
            .mode
            .parse()
            .map_err(|e: String| CliError::usage(format!("{e} (expected fig4, fig5, fig6, fig7 or custom)")))?;
        if custom_flags {
            return Err(CliError::usage(format!(
                "--protocol/--fixed-mm/--start-mm/--stop-mm/--step-mm conflict with --mode {fig}"
            )));
        }
        let plan = fig.plan(a.seed, a.dwell).map_err(|e| CliError::usage(e.to_string()))?;
        (plan, format!("{fig}_seed{}", a.seed))
    };

    let map = detected_map(&g).map_err(|e| CliError::runtime(e.to_string()))?;
    let result = scan_map(&plan, &map, &g, &RateModel::default()).map_err(|e| CliError::runtime(e.to_string()))?;

    out_dir(&a.common.out)?;
    write(&a.common.out.join(format!("{stem}.csv")), &result.to_csv())?;
    write(&a.common.out.join(format!("{stem}.svg")), &scan_plot(&result, &stem))?;
    Ok(0)
}

fn scanned_label(mode: ScanMode) -> &'static str {
    match mode {
        ScanMode::Scan2Fix1 => "x2 (mm)",
        ScanMode::JointEqual => "x1 = x2 (mm)",
        _ => "x1 (mm)",
    }
}

fn scan_plot(scan: &ScanResult, title: &str) -> String {
    let xs: Vec<f64> = scan.scanned().iter().map(|x| x * 1e3).collect();
    let column = |f: &dyn Fn(usize) -> u64| xs.iter().enumerate().map(|(i, &x)| (x, f(i) as f64)).collect();
    let rows = scan.rows();
    let x_label = scanned_label(scan.mode()).to_string();
    render(&[
        Panel {
            title: format!("{title}: single counts"),
            x_label: x_label.clone(),
            y_label: "counts".into(),
            series: vec![
                Series {
                    label: "D1".into(),
                    points: column(&|i| rows[i].singles1),
                    marker: Marker::Diamond,
                },
                Series {
                    label: "D2".into(),
                    points: column(&|i| rows[i].singles2),
                    marker: Marker::Circle,
                },
            ],
        },
        Panel {
            title: format!("{title}: coincidences"),
            x_label,
            y_label: "counts".into(),
            series: vec![Series {
                label: "coincidences".into(),
                points: column(&|i| rows[i].coincidences),
                marker: Marker::Dot,
            }],
        },
    ])
}

fn fit_plot(scan: &ScanResult, fit: &FitResult, title: &str) -> String {
    let xs = scan.scanned();
    let data = xs.iter().zip(scan.coincidences()).map(|(x, y)| (x * 1e3, y)).collect();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let model = (0..=400)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 400.0;
            (x * 1e3, fit.model(x))
        })
        .collect();
    render(&[Panel {
        title: format!("{title}: fit"),
        x_label: scanned_label(scan.mode()).into(),
        y_label: "coincidences".into(),
        series: vec![
            Series {
                label: "data".into(),
                points: data,
                marker: Marker::Dot,
            },
            Series {
                label: "B + A[1 - cos]".into(),
                points: model,
                marker: Marker::Line,
            },
        ],
    }])
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

pub fn fit(a: &FitArgs) -> Result<u8> {
    let g = geometry(a.common.config.as_deref())?;
    let text = read(&a.input)?;
    let scan = ScanResult::from_csv(&text).map_err(|e| CliError::runtime(format!("{}: {e}", a.input.display())))?;
    let fit = fit_fringe(&scan, &g).map_err(|e| CliError::runtime(format!("{}: {e}", a.input.display())))?;

    let name = stem(&a.input);
    let report = format!("source = {}\n{}", a.input.display(), fit.to_key_value());
    print!("{report}");
    out_dir(&a.common.out)?;
    write(&a.common.out.join(format!("{name}_fit.txt")), &report)?;
    write(&a.common.out.join(format!("{name}_fit.svg")), &fit_plot(&scan, &fit, &name))?;
    Ok(0)
}

pub fn classical(a: &ClassicalArgs) -> Result<u8> {
    let g = geometry(a.common.config.as_deref())?;
    let kind: EnsembleKind = a.kind.parse().map_err(|e| CliError::usage(format!("{e}")))?;
    let mut spec = ClassicalEnsembleSpec::new(kind, a.samples, a.seed);
    if let Some(l) = a.coherence_length {
        spec.transverse_coherence_length = l;
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let moments = classical_map(&spec, &g).map_err(|e| CliError::runtime(e.to_string()))?;
    let report =
        schwarz_report(ViolationInput::Map(&moments.gamma), a.threshold).map_err(|e| CliError::runtime(e.to_string()))?;

    let name = format!("classical_{kind}_seed{}", a.seed);
    let stderr_name = format!("{name}_stderr.csv");
    let annotations = [
        ("kind", kind.to_string()),
        ("samples", moments.realizations.to_string()),
        ("seed", a.seed.to_string()),
        ("stderr_file", stderr_name.clone()),
    ];
    out_dir(&a.common.out)?;
    write(&a.common.out.join(format!("{name}.csv")), &moments.gamma.to_csv(&annotations))?;
    if let Some(se) = moments.gamma.stderr_to_csv() {
        write(&a.common.out.join(&stderr_name), &se)?;
    }
    let text = format!("{}{}\n", report.to_key_value(), report.verdict_line());
    print!("{text}");
    write(&a.common.out.join(format!("{name}_report.txt")), &text)?;
    Ok(0)
}

fn load_map(path: &Path, text: &str) -> Result<CorrelationMap> {
    let (map, comment) =
        CorrelationMap::from_csv(text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let Some((_, name)) = comment.iter().find(|(k, _)| k == "stderr_file") else {
        return Ok(map);
    };
    let se_path = path.parent().map_or_else(|| PathBuf::from(name), |d| d.join(name));
    let se_text = read(&se_path)?;
    map.with_stderr_csv(&se_text)
        .map_err(|e| CliError::runtime(format!("{}: {e}", se_path.display())))
}

pub fn report(a: &ReportArgs) -> Result<u8> {
    let g = geometry(a.config.as_deref())?;
    let period = g.fringe_period();
    let mut scans = Vec::new();
    let mut rows: Vec<(String, std::result::Result<ViolationReport, String>)> = Vec::new();

    for path in &a.files {
        let text = read(path)?;
        match file_kind(&text) {
            Some("scan") => {
                let scan =
                    ScanResult::from_csv(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
                let r = schwarz_report(ViolationInput::Scans { scans: std::slice::from_ref(&scan), period }, a.threshold);
                rows.push((path.display().to_string(), r.map_err(|e| e.to_string())));
                scans.push(scan);
            }
            Some("correlation_map") => {
                let map = load_map(path, &text)?;
                let r = schwarz_report(ViolationInput::Map(&map), a.threshold);
                rows.push((path.display().to_string(), r.map_err(|e| e.to_string())));
            }
            _ => {
                return Err(CliError::runtime(format!(
                    "{}: not a scan or correlation-map file",
                    path.display()
                )))
            }
        }
    }
    if scans.len() > 1 {
        let r = schwarz_report(ViolationInput::Scans { scans: &scans, period }, a.threshold);
        rows.push(("all scans".into(), r.map_err(|e| e.to_string())));
    }

    println!("source\tgamma_zero\tgamma_delta_max\tsignificance\tviolated");
    let mut any = false;
    let mut best = f64::NEG_INFINITY;
    let mut computed = 0;
    for (source, r) in &rows {
        match r {
            Ok(r) => {
                computed += 1;
                any |= r.violated;
                best = best.max(r.significance);
                println!(
                    "{source}\t{:.3} ± {:.3}\t{:.3} ± {:.3}\t{:.2}\t{}",
                    r.gamma_zero.value,
                    r.gamma_zero.stderr,
                    r.gamma_delta_max.value,
                    r.gamma_delta_max.stderr,
                    r.significance,
                    r.violated
                );
            }
            Err(e) => println!("{source}\tn/a: {e}"),
        }
    }
    if computed == 0 {
        return Err(CliError::runtime("no input supports a report (need δ = 0 and δ ≠ 0 samples)"));
    }
    println!("verdict violated={any} max_significance={best} threshold={}", a.threshold);
    Ok(if any { 0 } else { NO_VIOLATION })
}
