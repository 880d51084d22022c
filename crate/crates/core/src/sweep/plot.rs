use std::fmt::Write as _;
use std::path::Path;

use super::config::{Family, ThresholdCriterion};
use super::{detect_interpolation_threshold, RiskPoint, Stat, SweepResult};
use crate::error::{Error, Result};

/// Everything the plot shows; built from CSV rows alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub family: String,
    pub capacity: Vec<f64>,
    pub train_sq: Vec<Option<f64>>,
    pub test_sq: Vec<Option<f64>>,
    pub train_01: Vec<Option<f64>>,
    pub test_01: Vec<Option<f64>>,
    pub norm: Vec<Option<f64>>,
    pub norm_kind: String,
    pub threshold: Option<i64>,
    /// `(label, test squared, test zero-one, norm)` of each reference row.
    pub references: Vec<(String, Option<f64>, Option<f64>, Option<f64>)>,
}

fn mean(s: Option<Stat>) -> Option<f64> {
    s.map(|s| s.mean)
}

impl PlotData {
    pub fn from_points(points: &[RiskPoint], threshold: Option<i64>) -> Self {
        let curve: Vec<&RiskPoint> = points.iter().filter(|p| !p.is_reference()).collect();
        PlotData {
            family: curve.first().map_or_else(String::new, |p| p.family.clone()),
            capacity: curve.iter().map(|p| p.capacity as f64).collect(),
            train_sq: curve.iter().map(|p| mean(p.train_sq)).collect(),
            test_sq: curve.iter().map(|p| mean(p.test_sq)).collect(),
            train_01: curve.iter().map(|p| mean(p.train_01)).collect(),
            test_01: curve.iter().map(|p| mean(p.test_01)).collect(),
            norm: curve.iter().map(|p| mean(p.norm)).collect(),
            norm_kind: curve
                .iter()
                .map(|p| p.norm_kind.name())
                .find(|k| *k != "none")
                .unwrap_or("none")
                .to_string(),
            threshold,
            references: points
                .iter()
                .filter(|p| p.is_reference())
                .map(|p| {
                    (
                        p.family.clone(),
                        mean(p.test_sq),
                        mean(p.test_01),
                        mean(p.norm),
                    )
                })
                .collect(),
        }
    }

    /// Rebuilds plot data from CSV rows, locating the threshold with the
    /// family's default criterion (squared risk at most `tol`, or zero
    /// classification error for nets).
    pub fn from_csv_points(points: &[RiskPoint], tol: f64) -> Self {
        let criterion = points
            .iter()
            .find(|p| !p.is_reference())
            .and_then(|p| Family::from_name(&p.family))
            .map_or(ThresholdCriterion::Squared, |f| f.default_criterion());
        let threshold = detect_interpolation_threshold(points, criterion, tol);
        Self::from_points(points, threshold)
    }
}

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 230.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const GAP: f64 = 60.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, prefer_log: bool) -> Option<Axis> {
        let vals: Vec<f64> = values.filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            return None;
        }
        let positive = vals.iter().all(|&v| v > 0.0);
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let log = prefer_log && positive && hi / lo >= 20.0;
        if log {
            lo = lo.log10().floor();
            hi = hi.log10().ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            lo = lo.min(0.0);
            if hi <= lo {
                hi = lo + 1.0;
            }
        }
        Some(Axis { lo, hi, log })
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i64, self.hi as i64);
            let stride = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(stride as usize)
                .map(|e| (10f64.powi(e as i32), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    values: &'a [Option<f64>],
}

fn panel(
    svg: &mut String,
    top: f64,
    title: &str,
    x: &Axis,
    xs: &[f64],
    series: &[Series],
    threshold: Option<f64>,
    refs: &[(String, f64)],
) {
    let plot_w = WIDTH - LEFT - RIGHT;
    let ys = series
        .iter()
        .flat_map(|s| s.values.iter().flatten().copied())
        .chain(refs.iter().map(|r| r.1));
    let Some(y) = Axis::fit(ys, true) else {
        return;
    };
    let px = |v: f64| LEFT + x.unit(v) * plot_w;
    let py = |v: f64| top + (1.0 - y.unit(v)) * PANEL_H;
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="{:.1}" font-size="13">{title}</text>"#,
        top - 8.0
    );
    for (v, label) in y.ticks() {
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{label}</text><line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            LEFT - 4.0,
            py(v) + 3.0,
            LEFT + plot_w,
            py(v),
            py(v)
        );
    }
    for (v, label) in x.ticks() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{label}</text>"#,
            px(v),
            top + PANEL_H + 14.0
        );
    }
    if let Some(t) = threshold {
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.1}" x2="{0:.1}" y1="{top}" y2="{1:.1}" stroke="#000" stroke-dasharray="4 3"/>"##,
            px(t),
            top + PANEL_H
        );
    }
    let mut legend_y = top + 14.0;
    for s in series {
        let pts: Vec<String> = xs
            .iter()
            .zip(s.values)
            .filter_map(|(&c, v)| v.map(|v| format!("{:.1},{:.1}", px(c), py(v))))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.6" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{legend_y:.1}" font-size="11" fill="{}">{}</text>"#,
            LEFT + plot_w + 10.0,
            s.color,
            s.label
        );
        legend_y += 16.0;
    }
    for (label, v) in refs {
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{1:.1}" y2="{1:.1}" stroke="#2a9d3f" stroke-dasharray="6 3"/>"##,
            LEFT + plot_w,
            py(*v)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{legend_y:.1}" font-size="11" fill="#2a9d3f">{label}</text>"##,
            LEFT + plot_w + 10.0
        );
        legend_y += 16.0;
    }
}

/// Three stacked panels (squared risk, zero-one risk, norm) sharing the
/// capacity axis, with a dashed line at the threshold.
pub fn render_svg(data: &PlotData) -> String {
    let panels: Vec<bool> = vec![
        true,
        data.test_01
            .iter()
            .chain(&data.train_01)
            .any(|v| v.is_some()),
        data.norm.iter().any(|v| v.is_some()),
    ];
    let count = panels.iter().filter(|&&b| b).count() as f64;
    let height = TOP + count * (PANEL_H + GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let Some(x) = Axis::fit(data.capacity.iter().copied().filter(|&c| c > 0.0), true) else {
        svg.push_str("</svg>\n");
        return svg;
    };
    let threshold = data.threshold.map(|t| t as f64);
    let mut top = TOP;
    let refs = |pick: fn(&(String, Option<f64>, Option<f64>, Option<f64>)) -> Option<f64>| -> Vec<(String, f64)> {
        data.references.iter().filter_map(|r| pick(r).map(|v| (r.0.clone(), v))).collect()
    };
    panel(
        &mut svg,
        top,
        &format!("{}: squared risk", data.family),
        &x,
        &data.capacity,
        &[
            Series {
                label: "test",
                color: "#c0392b",
                values: &data.test_sq,
            },
            Series {
                label: "train",
                color: "#2c62b4",
                values: &data.train_sq,
            },
        ],
        threshold,
        &refs(|r| r.1),
    );
    top += PANEL_H + GAP;
    if panels[1] {
        panel(
            &mut svg,
            top,
            "zero-one risk",
            &x,
            &data.capacity,
            &[
                Series {
                    label: "test",
                    color: "#c0392b",
                    values: &data.test_01,
                },
                Series {
                    label: "train",
                    color: "#2c62b4",
                    values: &data.train_01,
                },
            ],
            threshold,
            &refs(|r| r.2),
        );
        top += PANEL_H + GAP;
    }
    if panels[2] {
        panel(
            &mut svg,
            top,
            &format!("norm ({})", data.norm_kind),
            &x,
            &data.capacity,
            &[Series {
                label: "norm",
                color: "#7d3c98",
                values: &data.norm,
            }],
            threshold,
            &refs(|r| r.3),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(result: &SweepResult, path: &Path) -> Result<()> {
    let svg = render_svg(&PlotData::from_points(&result.points, result.threshold()));
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::config::NormKind;
    use crate::sweep::{read_csv, write_csv};

    fn points() -> Vec<RiskPoint> {
        let s = |v: f64| Some(Stat { mean: v, std: 0.0 });
        let mut pts: Vec<RiskPoint> = [
            (10, 0.5, 0.6, 1.0),
            (100, 0.0, 3.0, 40.0),
            (1000, 0.0, 0.2, 5.0),
        ]
        .iter()
        .map(|&(c, tr, te, nm)| RiskPoint {
            family: "rff".into(),
            capacity: c,
            repeat_count: 1,
            train_sq: s(tr),
            test_sq: s(te),
            train_01: s(tr / 2.0),
            test_01: s(te / 10.0),
            norm: s(nm),
            norm_kind: NormKind::CoefL2,
            status: "ok".into(),
        })
        .collect();
        pts.push(RiskPoint {
            family: "rff_inf".into(),
            capacity: -1,
            norm_kind: NormKind::Rkhs,
            ..pts[2].clone()
        });
        pts
    }

    #[test]
    fn csv_round_trip_renders_identically() {
        let pts = points();
        let direct = render_svg(&PlotData::from_points(&pts, Some(100)));
        let mut buf = Vec::new();
        write_csv(&pts, &mut buf).unwrap();
        let again = PlotData::from_csv_points(&read_csv(&buf[..]).unwrap(), 1e-6);
        assert_eq!(again.threshold, Some(100));
        assert_eq!(render_svg(&again), direct);
        assert!(direct.starts_with("<svg") && direct.contains("stroke-dasharray=\"4 3\""));
        assert_eq!(direct.matches("<polyline").count(), 5);
    }

    #[test]
    fn empty_data_is_still_valid_svg() {
        let svg = render_svg(&PlotData::from_points(&[], None));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
