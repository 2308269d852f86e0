use super::{Result, Volume};

/// Dice overlap `2|S ∩ T| / (|S| + |T|)` of label `label` in two label maps.
///
/// Two empty sets agree perfectly and score 1.
pub fn dice(seg: &Volume, truth: &Volume, label: u16) -> Result<f64> {
    seg.same_grid(truth)?;
    let (a, b) = (seg.labels()?, truth.labels()?);
    Ok(dice_counts(&a, &b, label))
}

fn dice_counts(a: &[u16], b: &[u16], label: u16) -> f64 {
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let (ix, iy) = (x == label, y == label);
        na += ix as usize;
        nb += iy as usize;
        both += (ix && iy) as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// Dice for each requested label, in order.
pub fn dice_per_label(seg: &Volume, truth: &Volume, labels: &[u16]) -> Result<Vec<(u16, f64)>> {
    seg.same_grid(truth)?;
    let (a, b) = (seg.labels()?, truth.labels()?);
    Ok(labels.iter().map(|&l| (l, dice_counts(&a, &b, l))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;
    use proptest::prelude::*;

    fn lab(v: &[u16]) -> Volume {
        Volume::from_labels(Dims::new(v.len(), 1, 1), [1.0; 3], v).unwrap()
    }

    #[test]
    fn dice_reference_values() {
        let a = lab(&[1, 1, 0, 1]);
        assert_eq!(dice(&a, &a, 1).unwrap(), 1.0);
        assert_eq!(dice(&lab(&[1, 1, 0, 0]), &lab(&[0, 0, 1, 1]), 1).unwrap(), 0.0);
        // |S| = 3, |T| = 5, overlap 2.
        let s = lab(&[1, 1, 1, 0, 0, 0, 0, 0]);
        let t = lab(&[0, 1, 1, 1, 1, 1, 0, 0]);
        assert_eq!(dice(&s, &t, 1).unwrap(), 0.5);
        assert_eq!(dice(&s, &t, 7).unwrap(), 1.0);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        assert!(dice(&lab(&[1, 0]), &lab(&[1]), 1).is_err());
    }

    proptest! {
        #[test]
        fn dice_is_symmetric_and_bounded(
            a in prop::collection::vec(0u16..4, 1..64),
            seed in any::<u64>(),
            label in 0u16..4,
        ) {
            let b: Vec<u16> = a.iter().enumerate()
                .map(|(i, &x)| if (seed >> (i % 64)) & 1 == 1 { (x + 1) % 4 } else { x })
                .collect();
            let (va, vb) = (lab(&a), lab(&b));
            let d1 = dice(&va, &vb, label).unwrap();
            let d2 = dice(&vb, &va, label).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
            prop_assert_eq!(dice(&va, &va, label).unwrap(), 1.0);
        }
    }
}
