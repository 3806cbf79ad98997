//! Text formats: numbers at 15 significant digits, distribution JSON,
//! report JSON and the smoothing-path CSV.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{DiscreteDistribution, Point};
use crate::vonmises::PathCurve;

/// Significant digits used for every printed number.
pub const SIGNIFICANT_DIGITS: usize = 15;

/// Rounds to 15 significant decimal digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Formats like C's `%.15g`: fixed notation for decimal exponents in
/// `[-5, 15)`, scientific otherwise, no trailing zeros.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let r = round_sig(x);
    let exp = r.abs().log10().floor() as i32;
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// On-disk distribution: `points` required, `weights` optional (uniform
/// when absent). Duplicate points are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<DiscreteDistribution> {
        let points = Point::from_values(&self.points)?;
        match self.weights {
            Some(w) => DiscreteDistribution::new(points, w),
            None => DiscreteDistribution::uniform(&points),
        }
    }
}

/// Parses distribution JSON.
pub fn parse_distribution(text: &str) -> Result<DiscreteDistribution> {
    let file: DistributionFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_distribution()
}

/// Writes distribution JSON with 15-digit numbers.
pub fn distribution_to_json(dist: &DiscreteDistribution) -> String {
    let join = |v: &mut dyn Iterator<Item = f64>| v.map(fmt_num).collect::<Vec<_>>().join(",");
    format!(
        "{{\"points\":[{}],\"weights\":[{}]}}",
        join(&mut dist.support().iter().map(|p| p.value())),
        join(&mut dist.weights().iter().copied())
    )
}

/// Rounds every float inside a JSON value to 15 significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap());
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON of a report with rounded numbers and a trailing newline.
pub fn report_json<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("reports serialize to JSON");
    let mut out = serde_json::to_string_pretty(&round_json(value)).expect("JSON values print");
    out.push('\n');
    out
}

/// CSV with header `s,raw,bagged_M<m1>,…` and LF line endings. `raw` is
/// empty where the mixture is not a point mass.
pub fn path_csv(curve: &PathCurve) -> String {
    let mut out = String::from("s,raw");
    for m in &curve.m_list {
        out.push_str(&format!(",bagged_M{m}"));
    }
    out.push('\n');
    for (j, &s) in curve.s.iter().enumerate() {
        out.push_str(&fmt_num(s));
        out.push(',');
        if let Some(r) = curve.raw[j] {
            out.push_str(&fmt_num(r));
        }
        for series in &curve.bagged {
            out.push(',');
            out.push_str(&fmt_num(series[j]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0 / 9.0), "0.111111111111111");
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666666666667");
        assert_eq!(fmt_num(1e-20), "1e-20");
        assert_eq!(fmt_num(-1.5e300), "-1.5e300");
        assert_eq!(fmt_num(123456.0), "123456");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
    }

    #[test]
    fn distribution_json() {
        let d = parse_distribution(r#"{"points":[-1,1]}"#).unwrap();
        assert_eq!(d.weights(), &[0.5, 0.5]);
        let d = parse_distribution(r#"{"points":[1,-1,1],"weights":[0.25,0.5,0.25]}"#).unwrap();
        assert_eq!(d.weights(), &[0.5, 0.5]);
        let d = parse_distribution(r#"{"points":[1,-1,1]}"#).unwrap();
        assert_eq!(d.support().len(), 2);
        assert!(matches!(parse_distribution(r#"{"weights":[1]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_distribution(r#"{"points":[]}"#), Err(Error::EmptySample)));
        assert!(matches!(parse_distribution(r#"{"points":[1,2],"weights":[0.9,0.9]}"#), Err(Error::InvalidWeights(_))));
        assert!(matches!(parse_distribution("not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn round_json_numbers() {
        let v = serde_json::json!({"a": 1.0 / 3.0, "b": [0.1 + 0.2, 7], "c": "x"});
        let r = round_json(v);
        assert_eq!(r["a"].as_f64().unwrap(), 0.333333333333333);
        assert_eq!(r["b"][0].as_f64().unwrap(), 0.3);
        assert_eq!(r["b"][1].as_u64().unwrap(), 7);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Values with at most 15 significant digits.
        fn value15() -> impl Strategy<Value = f64> {
            (-999_999_999_999_999i64..=999_999_999_999_999, -20i32..20)
                .prop_map(|(m, e)| format!("{m}e{e}").parse::<f64>().unwrap())
        }

        proptest! {
            #[test]
            fn fmt_num_round_trips_15_digit_values(x in value15()) {
                let back: f64 = fmt_num(x).parse().unwrap();
                prop_assert_eq!(back.to_bits(), if x == 0.0 { 0f64.to_bits() } else { x.to_bits() });
            }

            #[test]
            fn distribution_json_round_trips(
                points in prop::collection::vec(value15(), 1..6),
                raw in prop::collection::vec(1u32..=8, 6),
            ) {
                // dyadic weights are exact in 15 digits
                let n = points.len();
                let total: u32 = raw[..n].iter().sum();
                let scale = total.next_power_of_two() as f64;
                let mut weights: Vec<f64> = raw[..n].iter().map(|&r| r as f64 / scale).collect();
                weights[n - 1] += 1.0 - weights.iter().sum::<f64>();
                let d = DiscreteDistribution::new(Point::from_values(&points).unwrap(), weights).unwrap();
                let back = parse_distribution(&distribution_to_json(&d)).unwrap();
                prop_assert_eq!(back, d);
            }
        }
    }
}
