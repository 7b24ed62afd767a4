//! Data-parallel helpers. With the `parallel` feature the batch loops run on the
//! rayon pool; without it, or under [`Exec::Sequential`], they run in order.

/// Execution policy for batch loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    /// Parallel when the `parallel` feature is compiled in.
    #[default]
    Auto,
    /// Always sequential.
    Sequential,
}

macro_rules! par_map {
    ($slice:expr, $f:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::{IntoParallelRefIterator, ParallelIterator};
            $slice.par_iter().map($f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            $slice.iter().map($f).collect()
        }
    }};
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Auto
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if self.is_parallel() && items.len() > 1 {
            par_map!(items, &f)
        } else {
            items.iter().map(f).collect()
        }
    }

    /// Fallible map; the first error in index order wins.
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }

    /// Runs two closures, concurrently when parallel.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::join(a, b);
        }
        (a(), b())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_under_both_policies() {
        let xs: Vec<u32> = (0..100).collect();
        let a = Exec::Auto.map(&xs, |x| x * 2);
        let b = Exec::Sequential.map(&xs, |x| x * 2);
        assert_eq!(a, b);
        assert_eq!(a[37], 74);
    }

    #[test]
    fn try_map_reports_first_error() {
        let xs: Vec<i32> = (0..10).collect();
        let r: Result<Vec<i32>, i32> =
            Exec::Auto.try_map(&xs, |&x| if x >= 4 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(4));
    }
}
