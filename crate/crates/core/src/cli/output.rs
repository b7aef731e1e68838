//! CSV rows, spectrum files and SVG line plots.

use std::io::Write;
use std::path::Path;

use crate::cooperativity::{SweepAxis, SweepPoint};
use crate::error::{Error, Result};
use crate::observables::SpectrumTrace;

pub const CSV_COLUMNS: [&str; 15] = [
    "axis",
    "n",
    "Z",
    "nJ",
    "g2",
    "cf",
    "reference",
    "fwhm",
    "residual",
    "truncation_tail",
    "status",
    "n_independent",
    "n_over_N",
    "n_over_Z",
    "n_max",
];

/// Twelve significant digits; undefined values are left empty.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn csv_row(point: &SweepPoint) -> Vec<String> {
    let mut row = vec![fmt_num(point.value)];
    match &point.outcome {
        Ok(r) => {
            let p = &r.point;
            let rec = &p.record;
            row.extend([
                fmt_num(rec.n),
                fmt_num(rec.z),
                fmt_num(rec.nj),
                fmt_opt(rec.g2),
                fmt_opt(p.cf),
                fmt_opt(p.reference),
                fmt_opt(r.spectrum.as_ref().and_then(|s| s.fwhm)),
                fmt_num(p.diagnostics.residual),
                fmt_num(p.diagnostics.truncation_tail),
                r.status().to_string(),
                if p.independent_n.is_empty() {
                    String::new()
                } else {
                    fmt_num(p.independent_total())
                },
                fmt_num(rec.n_per_emitter()),
                fmt_opt(rec.n_per_inversion()),
                p.diagnostics.n_max.to_string(),
            ]);
        }
        Err(_) => {
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.push(point.status());
            row.extend(std::iter::repeat_n(String::new(), 4));
        }
    }
    row
}

pub struct ResultsWriter {
    inner: csv::Writer<std::fs::File>,
}

impl ResultsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(csv_err)?;
        inner.write_record(CSV_COLUMNS).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, point: &SweepPoint) -> Result<()> {
        self.inner.write_record(csv_row(point)).map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Bins where `S ≥ 1e-9 · max S`, widened by one bin each side.
fn significant_range(s: &[f64]) -> std::ops::Range<usize> {
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep = |x: &f64| *x >= 1e-9 * max;
    let lo = s.iter().position(keep).unwrap_or(0).saturating_sub(1);
    let hi = s
        .iter()
        .rposition(keep)
        .map_or(s.len(), |i| (i + 2).min(s.len()));
    lo..hi
}

/// `omega,S` over the part of the grid carrying the spectral weight.
pub fn write_spectrum(path: &Path, spectrum: &SpectrumTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["omega", "S"]).map_err(csv_err)?;
    for k in significant_range(&spectrum.s) {
        w.write_record([fmt_num(spectrum.omega[k]), fmt_num(spectrum.s[k])])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// A minimal line plot.
pub fn line_plot(title: &str, x_label: &str, log_x: bool, series: &[Series]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| tx(*x).is_finite() && y.is_finite())
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (w - mr + ml) / 2.0,
        escape(title)
    );
    if finite.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let bounds = |v: Vec<f64>| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = bounds(finite.iter().map(|p| tx(p.0)).collect());
    let (y0, y1) = bounds(finite.iter().map(|p| p.1).collect());
    let px = |x: f64| ml + (tx(x) - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xpos = ml + f * (w - ml - mr);
        let ypos = h - mb - f * (h - mt - mb);
        let xtext = if log_x {
            format!("1e{xv:.1}")
        } else {
            format!("{xv:.3}")
        };
        svg.push_str(&format!(
            "<text x=\"{xpos}\" y=\"{}\" text-anchor=\"middle\">{xtext}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{yv:.3}</text>\n",
            h - mb + 16.0,
            ml - 4.0,
            ypos + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (w - mr + ml) / 2.0,
        h - 12.0,
        escape(x_label)
    ));
    if y0 < 0.0 && y1 > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{ml}\" x2=\"{}\" y1=\"{y}\" y2=\"{y}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
            w - mr,
            y = py(0.0)
        ));
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| tx(*x).is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
        let ly = mt + 16.0 * (i as f64 + 1.0);
        svg.push_str(&format!(
            "<line x1=\"{}\" x2=\"{}\" y1=\"{ly}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            w - mr + 10.0,
            w - mr + 30.0,
            w - mr + 35.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Cooperativity, photon number and `g²(0)` plots for one finished sweep.
pub fn write_sweep_plots(
    dir: &Path,
    axis: SweepAxis,
    log_x: bool,
    points: &[SweepPoint],
) -> Result<()> {
    let pick = |f: &dyn Fn(&SweepPoint) -> Option<f64>| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter_map(|p| f(p).map(|y| (p.value, y)))
            .collect()
    };
    let ok = |p: &SweepPoint| p.outcome.as_ref().ok().map(|r| r.point.clone());
    let plots = [
        (
            "cooperativity.svg",
            "cooperative fraction",
            vec![
                Series {
                    label: "cf".into(),
                    points: pick(&|p| ok(p).and_then(|c| c.cf)),
                },
                Series {
                    label: "(nJ - Z)/nJ".into(),
                    points: pick(&|p| ok(p).and_then(|c| c.reference)),
                },
            ],
        ),
        (
            "population.svg",
            "cavity population and inversion",
            vec![
                Series {
                    label: "n".into(),
                    points: pick(&|p| ok(p).map(|c| c.record.n)),
                },
                Series {
                    label: "Z".into(),
                    points: pick(&|p| ok(p).map(|c| c.record.z)),
                },
            ],
        ),
        (
            "g2.svg",
            "second-order coherence",
            vec![Series {
                label: "g2(0)".into(),
                points: pick(&|p| ok(p).and_then(|c| c.record.g2)),
            }],
        ),
    ];
    for (file, title, series) in plots {
        let mut f = std::fs::File::create(dir.join(file))?;
        f.write_all(line_plot(title, axis.name(), log_x, &series).as_bytes())?;
    }
    let spectra: Vec<Series> = points
        .iter()
        .filter_map(|p| {
            let s = p.outcome.as_ref().ok()?.spectrum.as_ref()?;
            let max = s.max();
            let r = significant_range(&s.s);
            Some(Series {
                label: format!("{} = {:.3e}", axis.name(), p.value),
                points: r.map(|k| (s.omega[k], s.s[k] / max)).collect(),
            })
        })
        .collect();
    if !spectra.is_empty() {
        let mut f = std::fs::File::create(dir.join("spectra.svg"))?;
        f.write_all(line_plot("normalized spectra", "omega / kappa", false, &spectra).as_bytes())?;
    }
    Ok(())
}
