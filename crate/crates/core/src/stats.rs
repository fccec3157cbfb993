//! Pitch statistics of bar collections, used to spot mode collapse.

use crate::dataset::{BarRoll, REGISTER_HIGH, REGISTER_LOW, STEPS};

#[derive(Clone, Debug, PartialEq)]
pub struct RollStats {
    pub bars: usize,
    /// Active cells per MIDI pitch.
    pub pitch_histogram: [u64; 128],
    pub pitch_class_histogram: [u64; 12],
    pub active_cells: u64,
    pub outside_register: u64,
    /// Mean over bars of the fraction of the 15 column boundaries at which
    /// the pitch changes (silence counts as a pitch).
    pub change_rate: f64,
    /// Columns with exactly one active pitch.
    pub monophonic_columns: u64,
}

impl RollStats {
    pub fn from_bars(bars: &[BarRoll]) -> Self {
        let mut s = RollStats {
            bars: bars.len(),
            pitch_histogram: [0; 128],
            pitch_class_histogram: [0; 12],
            active_cells: 0,
            outside_register: 0,
            change_rate: 0.0,
            monophonic_columns: 0,
        };
        let mut changes = 0u64;
        for b in bars {
            for p in b.columns().iter().flatten() {
                s.pitch_histogram[*p as usize] += 1;
                s.pitch_class_histogram[(*p % 12) as usize] += 1;
                s.active_cells += 1;
                if !(REGISTER_LOW..=REGISTER_HIGH).contains(p) {
                    s.outside_register += 1;
                }
            }
            let m = b.to_matrix();
            s.monophonic_columns += (0..STEPS)
                .filter(|&t| (0..128).filter(|&p| m[p * STEPS + t] != 0.0).count() == 1)
                .count() as u64;
            changes += b.columns().windows(2).filter(|w| w[0] != w[1]).count() as u64;
        }
        if !bars.is_empty() {
            s.change_rate = changes as f64 / (bars.len() * (STEPS - 1)) as f64;
        }
        s
    }

    pub fn outside_fraction(&self) -> f64 {
        if self.active_cells == 0 {
            0.0
        } else {
            self.outside_register as f64 / self.active_cells as f64
        }
    }

    pub fn inside_fraction(&self) -> f64 {
        if self.active_cells == 0 {
            0.0
        } else {
            1.0 - self.outside_fraction()
        }
    }

    /// Fraction of all columns with exactly one active pitch.
    pub fn monophonic_fraction(&self) -> f64 {
        if self.bars == 0 {
            0.0
        } else {
            self.monophonic_columns as f64 / (self.bars * STEPS) as f64
        }
    }

    /// Plain-text summary followed by a tab-separated block.
    pub fn report(&self, title: &str) -> String {
        let mut s = format!(
            "{title}\nbars: {}\nactive notes (cells): {}\nfraction outside [{REGISTER_LOW}, {REGISTER_HIGH}]: {:.4}\nper-bar note-change rate: {:.4}\nmonophonic columns: {:.4}\n\n",
            self.bars,
            self.active_cells,
            self.outside_fraction(),
            self.change_rate,
            self.monophonic_fraction()
        );
        s.push_str("[summary]\nkey\tvalue\n");
        s.push_str(&format!("bars\t{}\n", self.bars));
        s.push_str(&format!("active_cells\t{}\n", self.active_cells));
        s.push_str(&format!("outside_fraction\t{}\n", self.outside_fraction()));
        s.push_str(&format!("change_rate\t{}\n", self.change_rate));
        s.push_str(&format!("monophonic_fraction\t{}\n", self.monophonic_fraction()));
        s.push_str("[pitch_histogram]\npitch\tcount\tfraction\n");
        for (p, &c) in self.pitch_histogram.iter().enumerate().filter(|(_, &c)| c > 0) {
            s.push_str(&format!("{p}\t{c}\t{}\n", c as f64 / self.active_cells as f64));
        }
        s.push_str("[pitch_class_histogram]\nclass\tcount\n");
        for (p, c) in self.pitch_class_histogram.iter().enumerate() {
            s.push_str(&format!("{p}\t{c}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_c4_corpus() {
        let s = RollStats::from_bars(&[BarRoll::constant(60); 3]);
        assert_eq!(s.pitch_histogram[60], 48);
        assert_eq!(s.active_cells, 48);
        assert_eq!(s.outside_fraction(), 0.0);
        assert_eq!(s.change_rate, 0.0);
        assert_eq!(s.monophonic_fraction(), 1.0);
        assert!(s.report("t").contains("60\t48\t1\n"));
    }

    #[test]
    fn out_of_register_and_changes() {
        let mut cols = [Some(40); STEPS];
        for c in cols.iter_mut().skip(8) {
            *c = Some(70);
        }
        cols[15] = None;
        let b = BarRoll::from_columns(cols).unwrap();
        let s = RollStats::from_bars(&[b]);
        assert_eq!(s.active_cells, 15);
        assert_eq!(s.outside_register, 8);
        assert!((s.change_rate - 2.0 / 15.0).abs() < 1e-12);
        assert_eq!(s.monophonic_columns, 15);
        assert_eq!(s.pitch_class_histogram[4], 8);
    }
}
