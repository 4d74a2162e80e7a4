use crate::error::{Error, Result};
use crate::paths::SampledPath;

/// `sup_t |a(t) - b(t)|` on the union mesh, with linear interpolation.
pub fn sup_pairing_gap(a: &SampledPath, b: &SampledPath) -> Result<f64> {
    a.sup_distance(b)
}

/// One gap per test function.
pub fn sup_pairing_gaps(a: &[SampledPath], b: &[SampledPath]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::SampleCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    a.iter().zip(b).map(|(p, q)| sup_pairing_gap(p, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::uniform_mesh;

    #[test]
    fn examples() {
        let a = SampledPath::from_fn(uniform_mesh(1.0, 0.1).unwrap(), |t| t.sin()).unwrap();
        assert_eq!(sup_pairing_gap(&a, &a).unwrap(), 0.0);
        let b = SampledPath::from_fn(uniform_mesh(1.0, 0.1).unwrap(), |t| t.sin() - 0.25).unwrap();
        assert!((sup_pairing_gap(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(sup_pairing_gap(&a, &b).unwrap(), sup_pairing_gap(&b, &a).unwrap());
        let c = SampledPath::from_fn(uniform_mesh(2.0, 0.1).unwrap(), |t| t).unwrap();
        assert!(sup_pairing_gap(&a, &c).is_err());
        let d = SampledPath::from_fn(uniform_mesh(1.0, 0.03).unwrap(), |t| t.sin()).unwrap();
        let g = sup_pairing_gaps(&[a.clone(), b], &[d.clone(), d]).unwrap();
        assert!(g[0] < 0.01 && (g[1] - 0.25).abs() < 0.01);
        assert!(sup_pairing_gaps(&[a], &[]).is_err());
    }
}
