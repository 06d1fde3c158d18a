//! Ordering of serialized seam transitions.

use std::collections::HashMap;

use crate::sim::RobotId;

/// Largest pool scheduled exactly; larger pools are scheduled greedily.
pub const EXACT_POOL: usize = 12;

/// Cost model of a reallocation: each transition waits for its pair to
/// reach the slots, then holds the seam for `duration` ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReallocationInstance {
    pub robots: Vec<RobotId>,
    /// Ticks from each robot's position to the mover slot.
    pub approach_mover: Vec<u64>,
    /// Ticks from each robot's position to the helper slot.
    pub approach_helper: Vec<u64>,
    /// Robot standing at the spot a helper is left at after a transition.
    pub advanced: Option<usize>,
    pub duration: u64,
    pub count: usize,
}

impl ReallocationInstance {
    /// Ticks from the post-transition helper spot to the mover and helper
    /// slots: it stands just in front of the mover slot.
    pub const ADVANCED_TO_MOVER: u64 = 18;
    pub const ADVANCED_TO_HELPER: u64 = 36;

    fn to_mover(&self, i: usize, adv: Option<usize>) -> u64 {
        if adv == Some(i) { Self::ADVANCED_TO_MOVER } else { self.approach_mover[i] }
    }

    fn to_helper(&self, i: usize, adv: Option<usize>) -> u64 {
        if adv == Some(i) { Self::ADVANCED_TO_HELPER } else { self.approach_helper[i] }
    }

    /// Seam time of moving `m` with helper `h` from a state whose advanced
    /// robot is `adv`.
    pub fn step_cost(&self, m: usize, h: usize, adv: Option<usize>) -> u64 {
        self.to_mover(m, adv).max(self.to_helper(h, adv)) + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReallocationSchedule {
    /// (mover, helper) in seam order.
    pub pairs: Vec<(RobotId, RobotId)>,
    pub makespan: u64,
}

/// Minimum-makespan order of `count` transitions. The helper of each
/// transition may move next.
pub fn schedule_reallocation(inst: &ReallocationInstance) -> ReallocationSchedule {
    let n = inst.robots.len();
    let count = inst.count.min(n.saturating_sub(1));
    if count == 0 {
        return ReallocationSchedule { pairs: Vec::new(), makespan: 0 };
    }
    let (makespan, idx) = if n <= EXACT_POOL { exact(inst, count) } else { greedy(inst, count) };
    ReallocationSchedule { pairs: idx.into_iter().map(|(m, h)| (inst.robots[m], inst.robots[h])).collect(), makespan }
}

type Memo = HashMap<(u32, Option<usize>, usize), (u64, Option<(usize, usize)>)>;

fn exact(inst: &ReallocationInstance, count: usize) -> (u64, Vec<(usize, usize)>) {
    fn best(inst: &ReallocationInstance, pool: u32, adv: Option<usize>, left: usize, memo: &mut Memo) -> u64 {
        if left == 0 {
            return 0;
        }
        if let Some(v) = memo.get(&(pool, adv, left)) {
            return v.0;
        }
        let n = inst.robots.len();
        let mut out = (u64::MAX, None);
        for m in (0..n).filter(|m| pool & (1 << m) != 0) {
            for h in (0..n).filter(|h| *h != m && pool & (1 << h) != 0) {
                let c = inst.step_cost(m, h, adv) + best(inst, pool & !(1 << m), Some(h), left - 1, memo);
                if c < out.0 {
                    out = (c, Some((m, h)));
                }
            }
        }
        memo.insert((pool, adv, left), out);
        out.0
    }
    let mut memo = Memo::new();
    let full = (1u32 << inst.robots.len()) - 1;
    let total = best(inst, full, inst.advanced, count, &mut memo);
    let (mut pool, mut adv, mut pairs) = (full, inst.advanced, Vec::new());
    for left in (1..=count).rev() {
        let (m, h) = memo[&(pool, adv, left)].1.expect("feasible while two robots remain");
        pairs.push((m, h));
        pool &= !(1 << m);
        adv = Some(h);
    }
    (total, pairs)
}

fn greedy(inst: &ReallocationInstance, count: usize) -> (u64, Vec<(usize, usize)>) {
    let n = inst.robots.len();
    let mut pool = vec![true; n];
    let (mut adv, mut total, mut pairs) = (inst.advanced, 0, Vec::new());
    for _ in 0..count {
        let mut pick = None;
        for m in (0..n).filter(|m| pool[*m]) {
            for h in (0..n).filter(|h| *h != m && pool[*h]) {
                let c = inst.step_cost(m, h, adv);
                if pick.is_none_or(|(b, _, _)| c < b) {
                    pick = Some((c, m, h));
                }
            }
        }
        let (c, m, h) = pick.expect("two robots remain");
        total += c;
        pool[m] = false;
        adv = Some(h);
        pairs.push((m, h));
    }
    (total, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    /// Every ordered (mover, helper) sequence.
    fn enumerate(inst: &ReallocationInstance, pool: &[usize], adv: Option<usize>, left: usize) -> u64 {
        if left == 0 {
            return 0;
        }
        let mut best = u64::MAX;
        for &m in pool {
            for &h in pool {
                if h == m {
                    continue;
                }
                let rest: Vec<usize> = pool.iter().copied().filter(|x| *x != m).collect();
                best = best.min(inst.step_cost(m, h, adv) + enumerate(inst, &rest, Some(h), left - 1));
            }
        }
        best
    }

    fn random(rng: &mut SplitMix64, n: usize, count: usize) -> ReallocationInstance {
        ReallocationInstance {
            robots: (0..n as u32).map(RobotId).collect(),
            approach_mover: (0..n).map(|_| rng.next_u64() % 200).collect(),
            approach_helper: (0..n).map(|_| rng.next_u64() % 200).collect(),
            advanced: None,
            duration: 40,
            count,
        }
    }

    #[test]
    fn three_movers_match_enumeration() {
        let mut rng = SplitMix64::seed_from_u64(5);
        for n in 4..=6 {
            for _ in 0..10 {
                let inst = random(&mut rng, n, 3);
                let s = schedule_reallocation(&inst);
                let all: Vec<usize> = (0..n).collect();
                assert_eq!(s.makespan, enumerate(&inst, &all, None, 3));
                assert_eq!(s.pairs.len(), 3);
            }
        }
    }

    #[test]
    fn schedule_cost_is_the_sum_of_its_steps() {
        let mut rng = SplitMix64::seed_from_u64(9);
        let inst = random(&mut rng, 5, 4);
        let s = schedule_reallocation(&inst);
        let idx = |id: RobotId| id.0 as usize;
        let mut adv = None;
        let mut sum = 0;
        for (m, h) in &s.pairs {
            sum += inst.step_cost(idx(*m), idx(*h), adv);
            adv = Some(idx(*h));
        }
        assert_eq!(sum, s.makespan);
        let movers: std::collections::HashSet<_> = s.pairs.iter().map(|p| p.0).collect();
        assert_eq!(movers.len(), 4);
    }

    #[test]
    fn zero_count_is_empty() {
        let mut rng = SplitMix64::seed_from_u64(1);
        let mut inst = random(&mut rng, 3, 0);
        assert!(schedule_reallocation(&inst).pairs.is_empty());
        inst.count = 5;
        assert_eq!(schedule_reallocation(&inst).pairs.len(), 2);
    }
}
