//! CSV writers. Files open with `#` metadata lines, then a header row. Floats
//! use a fixed format and `NaN` prints as `nan`, so equal inputs give equal bytes.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::sweep::{SweepKind, SweepTable};

pub const FORMAT_VERSION: &str = "cfisac-csv v1";

/// Fixed-format float: scientific with 9 fractional digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.9e}")
    }
}

fn metadata<W: Write>(out: &mut W, command: &str, config: &ExperimentConfig, kind: Option<SweepKind>) -> anyhow::Result<()> {
    writeln!(out, "# {FORMAT_VERSION}")?;
    writeln!(out, "# command: {command}")?;
    writeln!(out, "# seed_base: {}", config.seed_base)?;
    writeln!(out, "# realizations: {}", config.realizations)?;
    if kind == Some(SweepKind::TargetDistance) {
        writeln!(out, "# distance_bin_m: {}", fmt_f64(config.distance_bin))?;
    }
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    Ok(())
}

/// One row per grid value, design and stream count.
pub fn write_table<W: Write>(out: &mut W, command: &str, config: &ExperimentConfig, table: &SweepTable) -> anyhow::Result<()> {
    metadata(out, command, config, Some(table.kind))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        table.kind.variable(),
        "strategy",
        "n_sensing",
        "count",
        "solved",
        "feasibility_rate",
        "mean_snr_db",
        "p10_snr_db",
        "median_snr_db",
        "p90_snr_db",
        "mean_sinr_db",
        "mean_min_sinr_db",
        "worst_min_sinr_db",
        "mean_sensing_rank",
    ];
    if config.timing {
        header.push("mean_runtime_s");
    }
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            fmt_f64(r.value),
            r.strategy.to_string(),
            r.n_sensing.to_string(),
            r.count.to_string(),
            r.solved.to_string(),
            fmt_f64(r.feasibility_rate),
            fmt_f64(r.mean_snr_db),
            fmt_f64(r.p10_snr_db),
            fmt_f64(r.median_snr_db),
            fmt_f64(r.p90_snr_db),
            fmt_f64(r.mean_sinr_db),
            fmt_f64(r.mean_min_sinr_db),
            fmt_f64(r.worst_min_sinr_db),
            fmt_f64(r.mean_sensing_rank),
        ];
        if config.timing {
            rec.push(fmt_f64(r.mean_runtime));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per realization, design and stream count, linear scale.
pub fn write_records<W: Write>(out: &mut W, command: &str, config: &ExperimentConfig, table: &SweepTable) -> anyhow::Result<()> {
    metadata(out, command, config, Some(table.kind))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        table.kind.variable(),
        "seed",
        "n_ues",
        "target_distance_m",
        "strategy",
        "n_sensing",
        "status",
        "feasible",
        "sensing_snr",
        "min_sinr",
        "ue_sinrs",
        "gammas",
        "achieved_ranks",
        "duality_gap",
    ];
    if config.timing {
        header.push("wall_time_s");
    }
    w.write_record(&header)?;
    let join_f = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";");
    for (value, run) in &table.runs {
        for r in &run.records {
            let m = &r.metrics;
            let mut rec = vec![
                fmt_f64(*value),
                run.seed.to_string(),
                run.n_ues.to_string(),
                fmt_f64(run.target_distance),
                r.strategy.to_string(),
                r.n_sensing.to_string(),
                serde_json::to_value(m.solver_status)?.as_str().unwrap_or_default().to_string(),
                r.feasible.to_string(),
                fmt_f64(m.sensing_snr),
                fmt_f64(m.min_sinr),
                join_f(&m.ue_sinrs),
                join_f(&run.gammas),
                m.achieved_ranks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"),
                fmt_f64(m.duality_gap),
            ];
            if config.timing {
                rec.push(fmt_f64(m.wall_time));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(fmt_f64(1.5), "1.500000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(-2e-7), "-2.000000000e-7");
    }
}
