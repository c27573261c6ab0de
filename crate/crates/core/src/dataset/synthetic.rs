//! Deterministic synthetic event file with the PMU column layout.
//!
//! 127 feature columns (four relays of 29 PMU signals each plus eleven log
//! flags) and a `marker` column. A handful of features carry class signal so
//! every pairwise experiment is learnable but not trivial; a few rows contain
//! an infinity to exercise cleaning.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EventClass;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub seed: u64,
    /// Every row whose index is `≡ 123 (mod 397)` gets an `inf` cell.
    pub inject_infinities: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 2000,
            seed: 7,
            inject_infinities: true,
        }
    }
}

/// The 127 feature column names in file order.
pub fn feature_columns() -> Vec<String> {
    let mut cols = Vec::with_capacity(127);
    for relay in 1..=4 {
        for ch in 1..=12 {
            let (angle, mag) = match ch {
                1..=3 | 7..=9 => ("VH", "V"),
                _ => ("IH", "I"),
            };
            cols.push(format!("R{relay}-PA{ch}:{angle}"));
            cols.push(format!("R{relay}-PM{ch}:{mag}"));
        }
        cols.push(format!("R{relay}-PA:Z"));
        cols.push(format!("R{relay}-PA:ZH"));
        cols.push(format!("R{relay}:F"));
        cols.push(format!("R{relay}:DF"));
        cols.push(format!("R{relay}:S"));
    }
    for i in 1..=4 {
        cols.push(format!("control_panel_log{i}"));
    }
    for i in 1..=4 {
        cols.push(format!("relay{i}_log"));
    }
    for i in 1..=3 {
        cols.push(format!("snort_log{i}"));
    }
    cols
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("valid normal")
}

fn baseline(name: &str, rng: &mut ChaCha8Rng) -> f64 {
    if name.contains("log") {
        return if rng.random::<f64>() < 0.02 { 1.0 } else { 0.0 };
    }
    let q = name.rsplit(':').next().unwrap_or("");
    match q {
        "VH" | "IH" | "ZH" => rng.random_range(-180.0..180.0),
        "V" => normal(130_000.0, 800.0).sample(rng),
        "I" => normal(400.0, 40.0).sample(rng),
        "Z" => normal(10.0, 1.0).sample(rng),
        "F" => normal(60.0, 0.01).sample(rng),
        "DF" => normal(0.0, 0.05).sample(rng),
        _ => 0.0,
    }
}

fn draw_class(rng: &mut ChaCha8Rng) -> EventClass {
    let u: f64 = rng.random();
    if u < 0.55 {
        EventClass::Attack
    } else if u < 0.85 {
        EventClass::Natural
    } else {
        EventClass::NoEvent
    }
}

/// Writes the synthetic CSV (header + `spec.rows` data rows).
pub fn write_csv<W: Write>(mut out: W, spec: &SyntheticSpec) -> std::io::Result<()> {
    let cols = feature_columns();
    let idx = |name: &str| cols.iter().position(|c| c == name).expect("known column");
    let attack_current = idx("R1-PM5:I");
    let attack_angle = idx("R3-PA5:IH");
    let coupled_angle = idx("R1-PA2:VH");
    let natural_angle = idx("R1-PA1:VH");
    let natural_voltage = idx("R4-PM2:V");
    let natural_current = idx("R2-PM5:I");
    let quiet_impedance = idx("R1-PA:ZH");
    let quiet_angle = idx("R2-PA6:IH");

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    writeln!(out, "{},marker", cols.join(","))?;
    let mut row = vec![0.0f64; cols.len()];
    for r in 0..spec.rows {
        let class = draw_class(&mut rng);
        for (v, name) in row.iter_mut().zip(&cols) {
            *v = baseline(name, &mut rng);
        }
        let attack = class == EventClass::Attack;
        let natural = class == EventClass::Natural;
        let quiet = class == EventClass::NoEvent;

        row[attack_angle] = if attack {
            normal(-30.0, 45.0).sample(&mut rng)
        } else {
            normal(25.0, 55.0).sample(&mut rng)
        };
        row[coupled_angle] = 0.6 * row[attack_angle] + normal(0.0, 40.0).sample(&mut rng);
        if attack {
            row[attack_current] += normal(55.0, 35.0).sample(&mut rng);
            // the voltage shift only shows when the current angle is positive
            if row[attack_angle] > 0.0 {
                row[natural_voltage] += 900.0;
            }
        }
        row[natural_angle] = if natural {
            normal(35.0, 30.0).sample(&mut rng)
        } else {
            normal(-5.0, 40.0).sample(&mut rng)
        };
        if natural {
            row[natural_voltage] -= normal(1100.0, 600.0).sample(&mut rng);
            row[natural_current] += normal(45.0, 30.0).sample(&mut rng);
        }
        row[quiet_impedance] = if quiet {
            normal(5.0, 20.0).sample(&mut rng)
        } else {
            normal(60.0, 40.0).sample(&mut rng)
        };
        if quiet {
            row[quiet_angle] = normal(-90.0, 30.0).sample(&mut rng);
        }

        let inf_col = (spec.inject_infinities && r % 397 == 123)
            .then(|| rng.random_range(0..cols.len()));
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.write_all(b",")?;
            }
            if inf_col == Some(j) {
                out.write_all(b"inf")?;
            } else if cols[j].contains("log") {
                write!(out, "{}", *v as i64)?;
            } else {
                write!(out, "{v:.4}")?;
            }
        }
        writeln!(out, ",{}", class.canonical_name())?;
    }
    Ok(())
}
