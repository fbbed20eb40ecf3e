//! Masked depth error metrics (mm) over pixels valid in both maps.

use crate::error::{Error, Result};
use crate::grid::DepthMap;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub name: String,
    pub mae: f64,
    pub rmse: f64,
    pub valid_pixel_count: usize,
    sum_abs: f64,
    sum_sq: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "name,mae_mm,rmse_mm,valid_pixels";

    pub fn compute(name: impl Into<String>, pred: &DepthMap, gt: &DepthMap) -> Result<Self> {
        pred.ensure_same_shape(gt)?;
        let mut sum_abs = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for (&a, &b) in pred.values().iter().zip(gt.values()) {
            if DepthMap::is_valid_value(a) && DepthMap::is_valid_value(b) {
                let r = a - b;
                sum_abs += r.abs();
                sum_sq += r * r;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Self::from_sums(name, sum_abs, sum_sq, count))
    }

    fn from_sums(name: impl Into<String>, sum_abs: f64, sum_sq: f64, count: usize) -> Self {
        let n = count as f64;
        Self {
            name: name.into(),
            mae: sum_abs / n,
            rmse: (sum_sq / n).sqrt(),
            valid_pixel_count: count,
            sum_abs,
            sum_sq,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.name,
            crate::io::fmt_f64(self.mae),
            crate::io::fmt_f64(self.rmse),
            self.valid_pixel_count
        )
    }
}

pub fn mae(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    MetricsReport::compute("", pred, gt).map(|r| r.mae)
}

pub fn rmse(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    MetricsReport::compute("", pred, gt).map(|r| r.rmse)
}

/// Pixel-count weighted aggregate: MAE is the weighted mean of MAEs, RMSE the
/// root of the weighted mean of squared errors.
pub fn aggregate(name: impl Into<String>, reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    let count: usize = reports.iter().map(|r| r.valid_pixel_count).sum();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let sum_abs = reports.iter().map(|r| r.sum_abs).sum();
    let sum_sq = reports.iter().map(|r| r.sum_sq).sum();
    Ok(MetricsReport::from_sums(name, sum_abs, sum_sq, count))
}

/// Builds a report from summary values alone, recovering the sums from the
/// means. Useful for aggregating tables produced elsewhere.
pub fn report_from_summary(
    name: impl Into<String>,
    mae: f64,
    rmse: f64,
    valid_pixel_count: usize,
) -> MetricsReport {
    let n = valid_pixel_count as f64;
    MetricsReport {
        name: name.into(),
        mae,
        rmse,
        valid_pixel_count,
        sum_abs: mae * n,
        sum_sq: rmse * rmse * n,
    }
}

pub fn to_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(MetricsReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> DepthMap {
        DepthMap::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_values() {
        let p = row(&[1.0, 2.0]);
        let g = row(&[2.0, 4.0]);
        assert_eq!(mae(&p, &g).unwrap(), 1.5);
        assert_eq!(rmse(&p, &g).unwrap(), 2.5f64.sqrt());
        assert_eq!(mae(&p, &p).unwrap(), 0.0);
        assert_eq!(rmse(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn masked_pixel_excluded() {
        let p = row(&[5.0, 7.0]);
        let g = row(&[2.0, f64::NAN]);
        assert_eq!(mae(&p, &g).unwrap(), 3.0);
        let r = MetricsReport::compute("x", &p, &g).unwrap();
        assert_eq!(r.valid_pixel_count, 1);
    }

    #[test]
    fn constant_offset() {
        let g = row(&[3.0, 9.0, 27.0, 4.5]);
        let p = row(&[3.25, 9.25, 27.25, 4.75]);
        assert_eq!(mae(&p, &g).unwrap(), 0.25);
        assert_eq!(rmse(&p, &g).unwrap(), 0.25);
    }

    #[test]
    fn errors() {
        assert_eq!(mae(&row(&[1.0]), &row(&[0.0])), Err(Error::EmptyMask));
        assert!(matches!(
            mae(&row(&[1.0]), &row(&[1.0, 2.0])),
            Err(Error::ShapeMismatch { .. })
        ));
        assert_eq!(aggregate("all", &[]), Err(Error::EmptyReports));
    }

    #[test]
    fn aggregate_examples() {
        let single = report_from_summary("a", 1.25, 2.0, 7);
        let agg = aggregate("a", std::slice::from_ref(&single)).unwrap();
        assert_eq!((agg.mae, agg.rmse, agg.valid_pixel_count), (1.25, 2.0, 7));

        let a = report_from_summary("a", 1.0, 1.0, 4);
        let b = report_from_summary("b", 3.0, 3.0, 4);
        assert_eq!(aggregate("all", &[a, b]).unwrap().mae, 2.0);

        let a = report_from_summary("a", 2.0, 2.0, 1);
        let b = report_from_summary("b", 0.0, 0.0, 3);
        assert_eq!(aggregate("all", &[a, b]).unwrap().rmse, 1.0);
    }

    #[test]
    fn csv_table() {
        let r = report_from_summary("kf1", 1.5, 2.0, 10);
        let csv = to_csv(&[r]);
        assert!(csv.starts_with("name,mae_mm,rmse_mm,valid_pixels\nkf1,"));
        assert!(csv.trim_end().ends_with(",10"));
    }
}
