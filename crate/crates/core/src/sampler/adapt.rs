/// Random-walk scale for one block of parameters, tuned by Robbins-Monro
/// during burn-in and frozen afterwards.
#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub block: &'static str,
    log_sd: f64,
    frozen: bool,
    proposals: u64,
    post_proposals: u64,
    post_accepted: u64,
}

const MIN_LOG_SD: f64 = -13.8; // ~1e-6
const MAX_LOG_SD: f64 = 4.6; // ~100

impl Slot {
    pub fn new(block: &'static str, variance: f64) -> Self {
        Self {
            block,
            log_sd: if variance > 0.0 { 0.5 * variance.ln() } else { f64::NEG_INFINITY },
            frozen: !(variance > 0.0),
            proposals: 0,
            post_proposals: 0,
            post_accepted: 0,
        }
    }

    /// Proposal standard deviation; zero means the block never moves.
    pub fn sd(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            self.log_sd.exp()
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn record(&mut self, accepted: bool, adapting: Option<f64>) {
        self.proposals += 1;
        match adapting {
            Some(target) => {
                let gain = (self.proposals as f64).powf(-0.6);
                let hit = if accepted { 1.0 } else { 0.0 };
                self.log_sd = (self.log_sd + gain * (hit - target)).clamp(MIN_LOG_SD, MAX_LOG_SD);
            }
            None => {
                self.post_proposals += 1;
                self.post_accepted += u64::from(accepted);
            }
        }
    }

    pub fn counts(&self) -> (u64, u64) {
        (self.post_accepted, self.post_proposals)
    }
}

/// Pool post-burn-in acceptance counts by block name.
pub(crate) fn acceptance_by_block<'a>(
    slots: impl IntoIterator<Item = &'a Slot>,
) -> std::collections::BTreeMap<String, f64> {
    let mut acc = std::collections::BTreeMap::<&str, (u64, u64)>::new();
    for s in slots {
        if s.is_frozen() {
            continue;
        }
        let e = acc.entry(s.block).or_default();
        let (a, p) = s.counts();
        e.0 += a;
        e.1 += p;
    }
    acc.into_iter()
        .filter(|(_, (_, p))| *p > 0)
        .map(|(k, (a, p))| (k.to_string(), a as f64 / p as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapts_towards_target_then_freezes() {
        let mut s = Slot::new("x", 1.0);
        for _ in 0..100 {
            s.record(false, Some(0.3));
        }
        let shrunk = s.sd();
        assert!(shrunk < 1.0);
        for _ in 0..10 {
            s.record(false, None);
        }
        assert_eq!(s.sd(), shrunk);
        assert_eq!(s.counts(), (0, 10));
    }

    #[test]
    fn zero_variance_is_frozen() {
        let mut s = Slot::new("x", 0.0);
        s.record(true, Some(0.3));
        assert_eq!(s.sd(), 0.0);
        assert!(acceptance_by_block([&s]).is_empty());
    }
}
