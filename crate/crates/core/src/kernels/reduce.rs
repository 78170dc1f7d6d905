use crate::scalar::Scalar;

/// Combines lane partials with a pairwise halving tree: pad to the next
/// power of two with zeros, then `p[l] += p[l + s]` for `s = P/2, P/4, .., 1`.
///
/// The combination order depends only on the length, never on scheduling.
/// An empty slice sums to zero.
pub fn tree_reduce<T: Scalar>(partials: &[T]) -> T {
    let mut buf = partials.to_vec();
    tree_reduce_in_place(&mut buf)
}

/// Same as [`tree_reduce`] but reuses `buf` as scratch; its contents are clobbered.
pub(crate) fn tree_reduce_in_place<T: Scalar>(buf: &mut Vec<T>) -> T {
    if buf.is_empty() {
        return T::ZERO;
    }
    let padded = buf.len().next_power_of_two();
    buf.resize(padded, T::ZERO);
    let mut stride = padded / 2;
    while stride > 0 {
        let (lo, hi) = buf.split_at_mut(stride);
        for (a, &b) in lo.iter_mut().zip(&hi[..stride]) {
            *a += b;
        }
        stride /= 2;
    }
    buf[0]
}
