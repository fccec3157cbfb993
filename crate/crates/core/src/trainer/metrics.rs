use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Discriminator,
    Generator,
}

/// One training iteration. Generator terms are the mean over the
/// iteration's two generator updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub iteration: u64,
    pub d_loss: f32,
    pub g_adv: f32,
    pub fm1: f32,
    pub fm2: f32,
    pub d_real: f32,
    pub d_fake: f32,
}

impl MetricRow {
    pub const HEADER: &'static str = "step\td_loss\tg_adv\tfm1\tfm2\td_real\td_fake";

    pub fn values(&self) -> [f32; 6] {
        [self.d_loss, self.g_adv, self.fm1, self.fm2, self.d_real, self.d_fake]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn to_tsv(&self) -> String {
        let mut s = self.iteration.to_string();
        for v in self.values() {
            let _ = write!(s, "\t{v}");
        }
        s
    }

    pub fn from_tsv(line: &str) -> Option<Self> {
        let mut it = line.split('\t');
        let iteration = it.next()?.parse().ok()?;
        let mut v = [0.0f32; 6];
        for slot in &mut v {
            *slot = it.next()?.parse().ok()?;
        }
        if it.next().is_some() {
            return None;
        }
        Some(MetricRow {
            iteration,
            d_loss: v[0],
            g_adv: v[1],
            fm1: v[2],
            fm2: v[3],
            d_real: v[4],
            d_fake: v[5],
        })
    }
}

/// Per-iteration metrics plus the order in which updates ran.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricRow>,
    pub schedule: Vec<StepKind>,
}

impl MetricsLog {
    pub fn d_steps(&self) -> usize {
        self.schedule.iter().filter(|&&k| k == StepKind::Discriminator).count()
    }

    pub fn g_steps(&self) -> usize {
        self.schedule.iter().filter(|&&k| k == StepKind::Generator).count()
    }

    /// True when the schedule is a repetition of D, G, G.
    pub fn schedule_is_d_g_g(&self) -> bool {
        self.schedule.len().is_multiple_of(3)
            && self
                .schedule
                .chunks(3)
                .all(|c| c == [StepKind::Discriminator, StepKind::Generator, StepKind::Generator])
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(MetricRow::HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.to_tsv());
            s.push('\n');
        }
        s
    }

    pub fn series(&self, f: impl Fn(&MetricRow) -> f32) -> Vec<f32> {
        self.rows.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip() {
        let r = MetricRow {
            iteration: 7,
            d_loss: 1.25,
            g_adv: 0.5,
            fm1: 3.0,
            fm2: 1e-3,
            d_real: 0.6,
            d_fake: 0.4,
        };
        assert_eq!(r.to_tsv().split('\t').count(), 7);
        assert_eq!(MetricRow::from_tsv(&r.to_tsv()), Some(r));
        assert_eq!(MetricRow::from_tsv("1\t2"), None);
    }

    #[test]
    fn schedule_pattern() {
        use StepKind::*;
        let mut log = MetricsLog {
            rows: vec![],
            schedule: vec![Discriminator, Generator, Generator, Discriminator, Generator, Generator],
        };
        assert!(log.schedule_is_d_g_g());
        assert_eq!((log.d_steps(), log.g_steps()), (2, 4));
        log.schedule.swap(0, 1);
        assert!(!log.schedule_is_d_g_g());
    }
}
