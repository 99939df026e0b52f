use std::path::Path;

use crate::error::Result;
use crate::train::MetricsRecord;

pub const METRICS_HEADER: &str = "epoch,split,loss,top1,afr,lr,seed,mode";

/// Six significant digits, formatted like C's `%g`.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant), exp.abs())
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.split.as_str(),
            format_g6(r.loss),
            format_g6(r.top1),
            format_g6(r.afr),
            format_g6(r.lr),
            r.seed,
            r.mode.as_str()
        ));
    }
    s
}

/// Writes the full record list (header first) atomically.
pub fn write_metrics(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    super::atomic_write(path, metrics_csv(records).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::LearningMode;
    use crate::train::Split;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.1234567, "0.123457"),
            (0.00086490, "0.0008649"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.00001234, "1.234e-05"),
            (999999.5, "1e+06"),
            (-2.5, "-2.5"),
            (0.93, "0.93"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x}");
        }
    }

    #[test]
    fn csv_lines() {
        assert_eq!(metrics_csv(&[]), format!("{METRICS_HEADER}\n"));
        let r = MetricsRecord {
            epoch: 1,
            split: Split::Test,
            loss: 0.25,
            top1: 0.9,
            afr: 0.125,
            lr: 0.001,
            seed: 7,
            mode: LearningMode::Stl,
        };
        let s = metrics_csv(&[r]);
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().nth(1), Some("1,test,0.25,0.9,0.125,0.001,7,stl"));
    }
}
