use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Labels separating the independent random streams of one run.
pub(crate) const EMISSION: u64 = 0x656d_6974;
pub(crate) const ARRIVALS: u64 = 0x6172_7276;
pub(crate) const THINNING: u64 = 0x7468_696e;
pub(crate) const DARK: u64 = 0x6461_726b;
pub(crate) const TRAJECTORY: u64 = 0x7472_616a;
pub(crate) const PIPELINE_EMISSION: u64 = 0x7069_7065;
pub(crate) const PIPELINE_DETECTION: u64 = 0x7069_7064;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a labelled sub-computation.
pub(crate) fn derive(seed: u64, label: u64) -> u64 {
    mix(seed ^ mix(label))
}

/// Generator for task `index` of the computation `label`.
pub(crate) fn substream(seed: u64, label: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, label));
    rng.set_stream(index);
    rng
}
