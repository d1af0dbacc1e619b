use advseg_tensor::Tensor;

use super::{LabelMap, RegionChannels};
use crate::error::{Error, Result};

/// Encodes labels as nested ET, TC, WT indicator channels.
pub fn labels_to_channels(lm: &LabelMap) -> Result<RegionChannels> {
    let n = lm.data.len();
    let mut data = vec![0.0f32; 3 * n];
    for (i, &v) in lm.data.iter().enumerate() {
        let (et, tc, wt) = match v {
            0 => (0.0, 0.0, 0.0),
            1 => (0.0, 1.0, 1.0),
            2 => (0.0, 0.0, 1.0),
            4 => (1.0, 1.0, 1.0),
            other => return Err(Error::InvalidLabel(other)),
        };
        data[i] = et;
        data[n + i] = tc;
        data[2 * n + i] = wt;
    }
    let [d, h, w] = lm.dims;
    Ok(RegionChannels { data: Tensor::new(vec![3, d, h, w], data)? })
}

/// Decodes region channels by priority ET, TC, WT, so every bit pattern maps
/// to a valid label even when nesting is violated.
pub fn channels_to_labels(rc: &RegionChannels, case_id: &str) -> Result<LabelMap> {
    let s = rc.data.shape();
    if s.len() != 4 || s[0] != 3 {
        return Err(Error::Shape(format!("region channels must be (3, D, H, W), got {s:?}")));
    }
    let n = s[1] * s[2] * s[3];
    let d = rc.data.data();
    if let Some(&v) = d.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinary(v));
    }
    let labels = (0..n)
        .map(|i| {
            if d[i] == 1.0 {
                4
            } else if d[n + i] == 1.0 {
                1
            } else if d[2 * n + i] == 1.0 {
                2
            } else {
                0
            }
        })
        .collect();
    Ok(LabelMap { data: labels, dims: [s[1], s[2], s[3]], case_id: case_id.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decode(bits: [f32; 3]) -> u8 {
        let rc = RegionChannels { data: Tensor::new(vec![3, 1, 1, 1], bits.to_vec()).unwrap() };
        channels_to_labels(&rc, "x").unwrap().data[0]
    }

    #[test]
    fn definition_table() {
        assert_eq!(decode([1.0, 1.0, 1.0]), 4);
        assert_eq!(decode([0.0, 1.0, 1.0]), 1);
        assert_eq!(decode([0.0, 0.0, 1.0]), 2);
        assert_eq!(decode([0.0, 0.0, 0.0]), 0);
        assert_eq!(decode([1.0, 0.0, 0.0]), 4);
        let rc = RegionChannels { data: Tensor::new(vec![3, 1, 1, 1], vec![0.5, 0.0, 0.0]).unwrap() };
        assert!(matches!(channels_to_labels(&rc, "x"), Err(Error::NonBinary(_))));
    }

    #[test]
    fn encoding_per_label() {
        let lm = LabelMap::new(vec![4, 2, 0, 1], [1, 1, 4], "x").unwrap();
        let rc = labels_to_channels(&lm).unwrap();
        assert_eq!(rc.data.data(), &[1., 0., 0., 0., 1., 0., 0., 1., 1., 1., 0., 1.]);
    }

    proptest! {
        #[test]
        fn labels_round_trip(raw in proptest::collection::vec(prop::sample::select(vec![0u8, 1, 2, 4]), 27)) {
            let lm = LabelMap::new(raw, [3, 3, 3], "x").unwrap();
            let rc = labels_to_channels(&lm).unwrap();
            prop_assert_eq!(channels_to_labels(&rc, "x").unwrap(), lm);
        }

        #[test]
        fn nested_channels_round_trip(levels in proptest::collection::vec(0usize..4, 27)) {
            // level 1 sets WT, 2 adds TC, 3 adds ET
            let n = levels.len();
            let mut data = vec![0.0f32; 3 * n];
            for (i, &l) in levels.iter().enumerate() {
                if l >= 1 { data[2 * n + i] = 1.0; }
                if l >= 2 { data[n + i] = 1.0; }
                if l >= 3 { data[i] = 1.0; }
            }
            let rc = RegionChannels { data: Tensor::new(vec![3, 3, 3, 3], data).unwrap() };
            let lm = channels_to_labels(&rc, "x").unwrap();
            prop_assert_eq!(labels_to_channels(&lm).unwrap(), rc);
        }
    }
}
