//! Long-format plot data: one record per plotted element, columns
//! `role,label,a,b,c,d`. Numbers are written in shortest round-trip form so
//! reading a file back reproduces the payload exactly.

use super::{Contribution, DependencePoint, Others, Payload, PlotKind, PlotSpec, SwarmPoint, VizError};

pub const PLOT_DATA_HEADER: [&str; 6] = ["role", "label", "a", "b", "c", "d"];

struct Record {
    role: &'static str,
    label: String,
    nums: [f64; 4],
}

fn rec(role: &'static str, label: impl Into<String>, nums: [f64; 4]) -> Record {
    Record {
        role,
        label: label.into(),
        nums,
    }
}

fn records(spec: &PlotSpec) -> Vec<Record> {
    let mut out = vec![
        rec("kind", spec.kind().name(), [spec.width as f64, spec.height as f64, 0.0, 0.0]),
        rec("title", spec.title.clone(), [0.0; 4]),
        rec("x_label", spec.x_label.clone(), [0.0; 4]),
        rec("y_label", spec.y_label.clone(), [0.0; 4]),
    ];
    let contribution = |role, c: &Contribution| rec(role, c.label.clone(), [c.phi, c.feature_value, 0.0, 0.0]);
    match &spec.payload {
        Payload::SummaryBar { bars } => {
            out.extend(bars.iter().map(|(l, v)| rec("bar", l.clone(), [*v, 0.0, 0.0, 0.0])));
        }
        Payload::Force { base, fx, stripes } => {
            out.push(rec("base", "", [*base, 0.0, 0.0, 0.0]));
            out.push(rec("fx", "", [*fx, 0.0, 0.0, 0.0]));
            out.extend(stripes.iter().map(|c| contribution("stripe", c)));
        }
        Payload::Waterfall {
            base,
            fx,
            steps,
            others,
        } => {
            out.push(rec("base", "", [*base, 0.0, 0.0, 0.0]));
            out.push(rec("fx", "", [*fx, 0.0, 0.0, 0.0]));
            out.extend(steps.iter().map(|c| contribution("step", c)));
            if let Some(o) = others {
                out.push(rec("others", "", [o.phi, o.count as f64, 0.0, 0.0]));
            }
        }
        Payload::Beeswarm { features, points } => {
            out.extend(features.iter().map(|(l, v)| rec("feature", l.clone(), [*v, 0.0, 0.0, 0.0])));
            out.extend(
                points
                    .iter()
                    .map(|p| rec("point", "", [p.feature as f64, p.phi, p.offset, p.percentile])),
            );
        }
        Payload::Dependence {
            feature,
            partner,
            points,
        } => {
            out.push(rec("feature", feature.clone(), [0.0; 4]));
            out.push(rec("partner", partner.clone(), [0.0; 4]));
            out.extend(
                points
                    .iter()
                    .map(|p| rec("point", "", [p.row_ref as f64, p.x, p.phi, p.percentile])),
            );
        }
        Payload::Heatmap {
            labels,
            values,
            constant,
        } => {
            out.extend(
                labels
                    .iter()
                    .zip(constant)
                    .map(|(l, &c)| rec("label", l.clone(), [f64::from(u8::from(c)), 0.0, 0.0, 0.0])),
            );
            for (i, row) in values.iter().enumerate() {
                out.extend(
                    row.iter()
                        .enumerate()
                        .map(|(j, &v)| rec("cell", "", [i as f64, j as f64, v, 0.0])),
                );
            }
        }
    }
    out
}

pub(super) fn write(spec: &PlotSpec) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLOT_DATA_HEADER).expect("in-memory write");
    for r in records(spec) {
        let nums = r.nums.map(|v| format!("{v:?}"));
        w.write_record([r.role, r.label.as_str(), &nums[0], &nums[1], &nums[2], &nums[3]])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

struct Parsed {
    line: usize,
    role: String,
    label: String,
    nums: [f64; 4],
}

impl Parsed {
    fn index(&self, k: usize) -> Result<usize, VizError> {
        let v = self.nums[k];
        if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(bad(self.line, format!("expected a non-negative integer, got {v}")))
        }
    }
}

fn bad(line: usize, reason: impl Into<String>) -> VizError {
    VizError::BadPlotData {
        line,
        reason: reason.into(),
    }
}

pub(super) fn read(text: &str) -> Result<PlotSpec, VizError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    if reader.headers()?.iter().ne(PLOT_DATA_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != PLOT_DATA_HEADER.len() {
            return Err(bad(line, "wrong field count"));
        }
        let mut nums = [0.0; 4];
        for (k, n) in nums.iter_mut().enumerate() {
            *n = record[k + 2]
                .parse()
                .map_err(|_| bad(line, format!("bad number {:?}", &record[k + 2])))?;
        }
        rows.push(Parsed {
            line,
            role: record[0].to_string(),
            label: record[1].to_string(),
            nums,
        });
    }

    let mut it = rows.into_iter();
    let mut expect = |role: &str| -> Result<Parsed, VizError> {
        match it.next() {
            Some(p) if p.role == role => Ok(p),
            Some(p) => Err(bad(p.line, format!("expected {role:?}, found {:?}", p.role))),
            None => Err(bad(0, format!("missing {role:?} record"))),
        }
    };
    let kind_rec = expect("kind")?;
    let kind = PlotKind::from_name(&kind_rec.label)
        .ok_or_else(|| bad(kind_rec.line, format!("unknown plot kind {:?}", kind_rec.label)))?;
    let width = kind_rec.index(0)? as u32;
    let height = kind_rec.index(1)? as u32;
    let title = expect("title")?.label;
    let x_label = expect("x_label")?.label;
    let y_label = expect("y_label")?.label;
    let rest: Vec<Parsed> = it.collect();

    let only = |roles: &[&str]| -> Result<(), VizError> {
        match rest.iter().find(|p| !roles.contains(&p.role.as_str())) {
            Some(p) => Err(bad(p.line, format!("unexpected role {:?}", p.role))),
            None => Ok(()),
        }
    };
    let single = |role: &str| -> Result<&Parsed, VizError> {
        let mut found = rest.iter().filter(|p| p.role == role);
        match (found.next(), found.next()) {
            (Some(p), None) => Ok(p),
            (_, Some(p)) => Err(bad(p.line, format!("duplicate {role:?} record"))),
            (None, _) => Err(bad(0, format!("missing {role:?} record"))),
        }
    };
    let contributions = |role: &str| -> Vec<Contribution> {
        rest.iter()
            .filter(|p| p.role == role)
            .map(|p| Contribution {
                label: p.label.clone(),
                phi: p.nums[0],
                feature_value: p.nums[1],
            })
            .collect()
    };

    let payload = match kind {
        PlotKind::SummaryBar => {
            only(&["bar"])?;
            Payload::SummaryBar {
                bars: rest.iter().map(|p| (p.label.clone(), p.nums[0])).collect(),
            }
        }
        PlotKind::Force => {
            only(&["base", "fx", "stripe"])?;
            Payload::Force {
                base: single("base")?.nums[0],
                fx: single("fx")?.nums[0],
                stripes: contributions("stripe"),
            }
        }
        PlotKind::Waterfall => {
            only(&["base", "fx", "step", "others"])?;
            let others = match rest.iter().filter(|p| p.role == "others").count() {
                0 => None,
                _ => {
                    let o = single("others")?;
                    Some(Others {
                        count: o.index(1)?,
                        phi: o.nums[0],
                    })
                }
            };
            Payload::Waterfall {
                base: single("base")?.nums[0],
                fx: single("fx")?.nums[0],
                steps: contributions("step"),
                others,
            }
        }
        PlotKind::Beeswarm => {
            only(&["feature", "point"])?;
            let features = rest
                .iter()
                .filter(|p| p.role == "feature")
                .map(|p| (p.label.clone(), p.nums[0]))
                .collect();
            let points = rest
                .iter()
                .filter(|p| p.role == "point")
                .map(|p| {
                    Ok(SwarmPoint {
                        feature: p.index(0)?,
                        phi: p.nums[1],
                        offset: p.nums[2],
                        percentile: p.nums[3],
                    })
                })
                .collect::<Result<_, VizError>>()?;
            Payload::Beeswarm { features, points }
        }
        PlotKind::Dependence => {
            only(&["feature", "partner", "point"])?;
            let points = rest
                .iter()
                .filter(|p| p.role == "point")
                .map(|p| {
                    Ok(DependencePoint {
                        row_ref: p.index(0)?,
                        x: p.nums[1],
                        phi: p.nums[2],
                        percentile: p.nums[3],
                    })
                })
                .collect::<Result<_, VizError>>()?;
            Payload::Dependence {
                feature: single("feature")?.label.clone(),
                partner: single("partner")?.label.clone(),
                points,
            }
        }
        PlotKind::Heatmap => {
            only(&["label", "cell"])?;
            let labels: Vec<&Parsed> = rest.iter().filter(|p| p.role == "label").collect();
            let n = labels.len();
            let mut values = vec![vec![f64::NAN; n]; n];
            for p in rest.iter().filter(|p| p.role == "cell") {
                let (i, j) = (p.index(0)?, p.index(1)?);
                if i >= n || j >= n {
                    return Err(bad(p.line, format!("cell ({i}, {j}) outside {n}x{n}")));
                }
                values[i][j] = p.nums[2];
            }
            if values.iter().flatten().any(|v| v.is_nan()) {
                return Err(bad(0, "heatmap cells missing"));
            }
            Payload::Heatmap {
                labels: labels.iter().map(|p| p.label.clone()).collect(),
                values,
                constant: labels.iter().map(|p| p.nums[0] != 0.0).collect(),
            }
        }
    };
    let spec = PlotSpec {
        title,
        width,
        height,
        x_label,
        y_label,
        payload,
    };
    spec.validate()?;
    Ok(spec)
}
