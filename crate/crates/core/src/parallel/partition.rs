use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// How branches are assigned to workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Contiguous chunks of near-equal size.
    Block,
    /// A seeded permutation, then chunks.
    Shuffle(u64),
    /// Longest measured branch first, onto the least loaded worker.
    Greedy,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Block => f.write_str("block"),
            Strategy::Shuffle(s) => write!(f, "shuffle({s})"),
            Strategy::Greedy => f.write_str("greedy"),
        }
    }
}

/// Assignment of branches `0..n` to workers `0..workers`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionPlan {
    pub workers: usize,
    pub strategy: Strategy,
    /// `assignment[j]` is the worker of branch `j`.
    pub assignment: Vec<usize>,
}

impl PartitionPlan {
    /// Branches of worker `k`, ascending.
    pub fn branches_of(&self, k: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&j| self.assignment[j] == k).collect()
    }

    /// Per-worker sums of branch times.
    pub fn loads(&self, tau: &[u64]) -> Vec<u64> {
        let mut l = vec![0; self.workers];
        for (j, &k) in self.assignment.iter().enumerate() {
            l[k] += tau.get(j).copied().unwrap_or(0);
        }
        l
    }

    pub fn max_load(&self, tau: &[u64]) -> u64 {
        self.loads(tau).into_iter().max().unwrap_or(0)
    }
}

/// Measured analysis time of each branch, in microseconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TimingRecord {
    pub tau: Vec<u64>,
}

fn chunks(order: &[usize], workers: usize) -> Vec<usize> {
    let n = order.len();
    let mut assignment = vec![0; n];
    let (base, extra) = (n / workers, n % workers);
    let mut pos = 0;
    for k in 0..workers {
        let size = base + usize::from(k < extra);
        for &j in &order[pos..pos + size] {
            assignment[j] = k;
        }
        pos += size;
    }
    assignment
}

/// Assign `n` branches to `workers` workers. The plan depends only on the
/// arguments. Greedy without timings treats all branches as equal.
pub fn partition(n: usize, workers: usize, strategy: Strategy, timings: Option<&TimingRecord>) -> PartitionPlan {
    assert!(workers >= 1, "at least one worker");
    let assignment = match strategy {
        Strategy::Block => chunks(&(0..n).collect::<Vec<_>>(), workers),
        Strategy::Shuffle(seed) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            chunks(&order, workers)
        }
        Strategy::Greedy => {
            let tau: Vec<u64> = (0..n).map(|j| timings.and_then(|t| t.tau.get(j).copied()).unwrap_or(1)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| tau[b].cmp(&tau[a]).then(a.cmp(&b)));
            let mut load = vec![0u64; workers];
            let mut assignment = vec![0; n];
            for j in order {
                let k = (0..workers).min_by_key(|&k| (load[k], k)).unwrap();
                load[k] += tau[j];
                assignment[j] = k;
            }
            assignment
        }
    };
    PartitionPlan { workers, strategy, assignment }
}
