//! Deterministic JSON emitters for the data artifacts: postcritically
//! finite parameter lists, traced bones and entropy estimates. Floats are
//! written with 17 significant digits so identical runs produce identical
//! bytes.

use crate::bones::{Bone, BoneKind, BoundarySide, PCFPoint};
use crate::entropy::EntropyEstimate;
use crate::num::fmt_f64;

fn side_str(side: &Option<BoundarySide>) -> &'static str {
    match side {
        Some(BoundarySide::SigmaTwo) => "sigma_two",
        Some(BoundarySide::SigmaMinusSix) => "sigma_minus_six",
        Some(BoundarySide::WindowEdge) => "window_edge",
        None => "none",
    }
}

pub fn write_entropy_json(est: &EntropyEstimate) -> String {
    format!(
        "{{\n  \"value\": {},\n  \"upper_bound\": {},\n  \"method\": \"{}\",\n  \"depth\": {},\n  \"tolerance\": {},\n  \"converged\": {}\n}}\n",
        fmt_f64(est.value),
        fmt_f64(est.upper_bound),
        est.method.as_str(),
        est.depth,
        fmt_f64(est.tolerance),
        est.converged
    )
}

pub fn write_pcf_json(points: &[PCFPoint]) -> String {
    let mut out = String::from("{\n  \"points\": [\n");
    for (i, p) in points.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"n\": {}, \"m\": {}, \"v1\": {}, \"v2\": {}, \"jacobian\": [[{}, {}], [{}, {}]], \"quotient\": {}, \"derivative_sign\": {}, \"residual_r1\": {}, \"residual_r2\": {}}}{}\n",
            p.n,
            p.m,
            fmt_f64(p.v.v1),
            fmt_f64(p.v.v2),
            fmt_f64(p.jacobian[0][0]),
            fmt_f64(p.jacobian[0][1]),
            fmt_f64(p.jacobian[1][0]),
            fmt_f64(p.jacobian[1][1]),
            fmt_f64(p.quotient),
            p.derivative_sign,
            fmt_f64(p.residuals[0]),
            fmt_f64(p.residuals[1]),
            if i + 1 < points.len() { "," } else { "" }
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn write_bones_json(bones: &[Bone]) -> String {
    let mut out = String::from("{\n  \"bones\": [\n");
    for (i, b) in bones.iter().enumerate() {
        let kind = match b.kind {
            BoneKind::Arc => "arc",
            BoneKind::Loop => "loop",
            BoneKind::Truncated => "truncated",
        };
        out.push_str(&format!(
            "    {{\"n\": {}, \"kind\": \"{}\", \"arclength\": {}, \"endpoints\": [\"{}\", \"{}\"], \"points\": [",
            b.n,
            kind,
            fmt_f64(b.arclength),
            side_str(&b.endpoint_info[0]),
            side_str(&b.endpoint_info[1]),
        ));
        for (j, p) in b.points.iter().enumerate() {
            out.push_str(&format!(
                "[{}, {}]{}",
                fmt_f64(p.v1),
                fmt_f64(p.v2),
                if j + 1 < b.points.len() { ", " } else { "" }
            ));
        }
        out.push_str(&format!(
            "]}}{}\n",
            if i + 1 < bones.len() { "," } else { "" }
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{EntropyEstimate, EntropyMethod};

    #[test]
    fn entropy_json_has_the_contract_fields() {
        let est = EntropyEstimate {
            value: 0.5,
            upper_bound: 0.6,
            method: EntropyMethod::Lap,
            depth: 40,
            tolerance: 1e-4,
            converged: true,
        };
        let json = write_entropy_json(&est);
        for key in ["\"value\"", "\"upper_bound\"", "\"method\"", "\"depth\""] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        assert!(json.contains("5.0000000000000000e-1"));
    }
}
