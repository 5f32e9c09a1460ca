//! Plain-text state files: one `re im` pair per line in row-major order
//! (subsystem 0 slowest), `#` starts a comment. An optional
//! `# dims: 2 2 2` line fixes the shape; otherwise qubits are assumed.

use std::path::Path;

use crate::error::{MonolabError, Result};
use crate::qcore::linalg::{c, CVector};
use crate::qcore::{PureState, SystemShape};

/// Largest |‖ψ‖ − 1| accepted before renormalizing.
pub const NORM_TOL: f64 = 1e-6;

pub fn parse_state(text: &str, dims: Option<&[usize]>) -> Result<PureState> {
    let mut amps = Vec::new();
    let mut header_dims: Option<Vec<usize>> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let (content, comment) = match raw.find('#') {
            Some(i) => (&raw[..i], Some(&raw[i + 1..])),
            None => (raw, None),
        };
        if let Some(rest) = comment.and_then(|c| c.trim().strip_prefix("dims:")) {
            let d = rest
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| MonolabError::Parse(format!("line {}: bad dims: {e}", lineno + 1)))?;
            header_dims = Some(d);
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [re, im] => {
                let parse = |t: &str| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| MonolabError::Parse(format!("line {}: bad number '{t}'", lineno + 1)))
                };
                amps.push(c(parse(re)?, parse(im)?));
            }
            _ => {
                return Err(MonolabError::Parse(format!(
                    "line {}: expected 're im', got {} fields",
                    lineno + 1,
                    fields.len()
                )))
            }
        }
    }
    if amps.is_empty() {
        return Err(MonolabError::Parse("no amplitudes".into()));
    }
    let shape = match dims.map(|d| d.to_vec()).or(header_dims) {
        Some(d) => SystemShape::new(d)?,
        None => {
            let n = amps.len();
            if !n.is_power_of_two() || n < 2 {
                return Err(MonolabError::Parse(format!(
                    "{n} amplitudes is not a qubit register; give dims"
                )));
            }
            SystemShape::qubits(n.trailing_zeros() as usize)
        }
    };
    let v = CVector::from_vec(amps);
    let norm = v.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(MonolabError::NotNormalized(norm));
    }
    PureState::normalized(shape, v)
}

pub fn read_state(path: &Path, dims: Option<&[usize]>) -> Result<PureState> {
    let text = std::fs::read_to_string(path).map_err(|e| MonolabError::Io(format!("{}: {e}", path.display())))?;
    parse_state(&text, dims)
}

/// Inverse of `parse_state`, with the dims header.
pub fn format_state(psi: &PureState) -> String {
    let dims: Vec<String> = psi.shape().dims().iter().map(|d| d.to_string()).collect();
    let mut out = format!("# dims: {}\n", dims.join(" "));
    for a in psi.amplitudes().iter() {
        out.push_str(&format!("{:.17e} {:.17e}\n", a.re, a.im));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::named::{ghz, w};

    #[test]
    fn ghz_file() {
        let text = "# GHZ\n0.7071067811865476 0\n0 0\n0 0\n0 0\n\n0 0\n0 0\n0 0\n0.7071067811865476 0 # last\n";
        let psi = parse_state(text, None).unwrap();
        assert_eq!(psi.shape(), &SystemShape::qubits(3));
        assert!((psi.amplitudes() - ghz(3).amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn round_trip_with_dims() {
        let psi = w(3);
        let back = parse_state(&format_state(&psi), None).unwrap();
        assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-15);
        let qutrit = "# dims: 3 2\n1 0\n0 0\n0 0\n0 0\n0 0\n0 0\n";
        assert_eq!(parse_state(qutrit, None).unwrap().shape().dims(), &[3, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_state("", None).is_err());
        assert!(parse_state("1 0 0\n", None).is_err());
        assert!(parse_state("1 x\n0 0\n", None).is_err());
        assert!(parse_state("1 0\n0 0\n0 0\n", None).is_err());
        assert!(matches!(
            parse_state("1 0\n1 0\n", None),
            Err(MonolabError::NotNormalized(_))
        ));
        assert!(parse_state("1 0\n0 0\n", Some(&[3])).is_err());
    }
}
