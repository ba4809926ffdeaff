//! Order-preserving parallel map over independent work items.

use crate::error::Result;

/// Maps `f` over `items` on up to `threads` scoped workers; results keep input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    if threads <= 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Result<Vec<U>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for handle in handles {
            out.extend(handle.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        let seq = par_map(&xs, 1, |x| Ok(x * x)).unwrap();
        assert_eq!(par_map(&xs, 4, |x| Ok(x * x)).unwrap(), seq);
    }
}
