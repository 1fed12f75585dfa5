//! Thread-backed executor honouring `FICTOP_THREADS`.

use fictop_core::parallel::Executor;

pub const THREADS_VAR: &str = "FICTOP_THREADS";

/// Runs the second closure of a join on a scoped thread when more than one
/// thread is allowed. Results do not depend on the thread count.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    pub max: usize,
}

impl Threads {
    /// Reads `FICTOP_THREADS`; unset means the available parallelism.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(THREADS_VAR) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Threads { max: n }),
                _ => Err(format!("{THREADS_VAR} must be a positive integer, got `{v}`")),
            },
            Err(_) => Ok(Threads {
                max: std::thread::available_parallelism().map_or(1, |n| n.get()),
            }),
        }
    }
}

impl Executor for Threads {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        if self.max < 2 {
            let ra = a();
            return (ra, b());
        }
        std::thread::scope(|s| {
            let hb = s.spawn(b);
            let ra = a();
            (ra, hb.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
        })
    }
}
