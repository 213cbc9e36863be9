//! Randomized mechanisms, each available as an exact payoff distribution and
//! as a sampler driven by an explicit RNG stream.

pub mod lottery;
pub mod noisy;
pub mod partition;
pub mod surrogate;

/// Random stream handed to samplers.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use lottery::{lottery_wrap, lws, lws_mixed, sample_lottery};
pub use noisy::{
    compose_noise, group_plan, noisy_swme_conditional, noisy_swme_distribution, sample_noisy_swme, scale_payoffs,
    solve_agent_flip, GroupPlan, NoisyOutcomeModel,
};
pub use partition::{
    enumerate_partitions, group_marginals, partition_count, rp_swme_distribution, rp_swme_expected,
    rp_swme_expected_exchange, rp_swme_worst_case, sample_partition, sample_rp_swme, Partition, PARTITION_CAP,
};
pub use surrogate::{
    error_rate_candidates, most_exposed_agent, select_confusion_epsilon, select_error_rates,
    surrogate_nawm_distribution, swm_distribution, swm_distribution_unchecked, swm_worst_case, swme_distribution,
    swme_noise, swme_worst_case, SURROGATE_CAP,
};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream keyed by a master seed and a path of indices.
pub fn substream(seed: u64, path: &[u64]) -> SimRng {
    use rand::SeedableRng;
    let key = path.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    });
    SimRng::seed_from_u64(key)
}
