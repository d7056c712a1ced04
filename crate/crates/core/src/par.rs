//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the rayon global pool; without it every call is sequential. Results
//! always come back in input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Minimum of `f` over `items`, ignoring `None` and non-finite values.
    pub fn min_by_key<T, F>(self, items: &[T], f: F) -> Option<(usize, f64)>
    where
        T: Sync,
        F: Fn(&T) -> Option<f64> + Sync + Send,
    {
        let pick = |a: Option<(usize, f64)>, b: Option<(usize, f64)>| match (a, b) {
            (Some(x), Some(y)) => Some(if y.1 < x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        };
        let eval = |(i, t): (usize, &T)| f(t).filter(|v| v.is_finite()).map(|v| (i, v));
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().enumerate().map(eval).reduce(|| None, pick)
            }
            _ => items.iter().enumerate().map(eval).fold(None, pick),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(&xs, |x| x * x);
        let b = Execution::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        let f = |x: &u64| Some(((*x as f64) - 400.5).abs());
        assert_eq!(
            Execution::Sequential.min_by_key(&xs, f),
            Execution::Parallel.min_by_key(&xs, f)
        );
        assert_eq!(Execution::Sequential.min_by_key(&xs, f).unwrap().0, 400);
    }
}
