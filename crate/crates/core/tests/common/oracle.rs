//! Independent reference computations.

/// Counts ordered r-tuples of distinct elements of {0..n} by walking every
/// one of them. Zero requests count as zero messages.
pub fn enumerate_tuples(n: u32, r: u32) -> u64 {
    fn walk(n: u32, left: u32, used: u32) -> u64 {
        if left == 0 {
            return 1;
        }
        (0..n)
            .filter(|i| used & (1 << i) == 0)
            .map(|i| walk(n, left - 1, used | (1 << i)))
            .sum()
    }
    assert!(n < 32);
    if r == 0 {
        return 0;
    }
    walk(n, r, 0)
}
