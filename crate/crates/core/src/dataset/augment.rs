use super::{chord_to_vec, fold_to_register, vec_to_chord, BarGroup};

/// Shift melody and chords up by `semitones`, refolding the melody into the
/// training register.
pub fn transpose_group(group: &BarGroup, semitones: u8) -> BarGroup {
    let bars = group
        .bars
        .iter()
        .map(|b| b.map_pitches(|p| fold_to_register(p + semitones % 12)))
        .collect();
    let chords = group.chords.as_ref().map(|cs| {
        cs.iter()
            .map(|v| chord_to_vec(vec_to_chord(v).expect("valid chord vector").transpose(semitones)))
            .collect()
    });
    BarGroup { bars, chords }
}

/// Every group in all twelve keys (shift 0 first), twelve outputs per input.
pub fn transpose_augment(groups: &[BarGroup]) -> Vec<BarGroup> {
    groups
        .iter()
        .flat_map(|g| (0..12).map(move |s| transpose_group(g, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::SyntheticCorpus;
    use crate::dataset::{BarRoll, Chord};

    fn pc_histogram(g: &BarGroup) -> [usize; 12] {
        let mut h = [0; 12];
        for b in &g.bars {
            for p in b.columns().iter().flatten() {
                h[(p % 12) as usize] += 1;
            }
        }
        h
    }

    #[test]
    fn shift_zero_is_identity() {
        let groups = SyntheticCorpus::new(4).groups(3);
        let aug = transpose_augment(&groups);
        assert_eq!(aug.len(), 36);
        for (k, g) in groups.iter().enumerate() {
            assert_eq!(&aug[k * 12], g);
        }
    }

    #[test]
    fn pitch_class_histogram_rotates() {
        let g = &SyntheticCorpus::new(8).groups(1)[0];
        let base = pc_histogram(g);
        for s in 0..12u8 {
            let h = pc_histogram(&transpose_group(g, s));
            for pc in 0..12 {
                assert_eq!(h[(pc + s as usize) % 12], base[pc]);
            }
            assert!(transpose_group(g, s).bars.iter().all(BarRoll::in_register));
        }
    }

    #[test]
    fn chord_shift_round_trip() {
        let g = &SyntheticCorpus::new(9).groups(1)[0];
        for s in 0..12u8 {
            let back = transpose_group(&transpose_group(g, s), (12 - s) % 12);
            let roots = |g: &BarGroup| -> Vec<Chord> {
                g.chords
                    .as_ref()
                    .unwrap()
                    .iter()
                    .map(|v| vec_to_chord(v).unwrap())
                    .collect()
            };
            assert_eq!(roots(&back), roots(g));
        }
    }
}
