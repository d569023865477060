use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// Generator used by every instance family. Per-seed streams are stable.
pub(crate) type InstanceRng = SplitMix64;

pub(crate) fn seeded(seed: u64) -> InstanceRng {
    SplitMix64::seed_from_u64(seed)
}
