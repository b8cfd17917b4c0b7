use std::fmt;
use std::str::FromStr;

/// Every coordination scheme the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Consensus ALADIN with damped-BFGS Hessian approximations.
    BfgsAladin,
    /// Consensus ALADIN with `B_i = ρI` fixed.
    ReducedAladin,
    /// Consensus ALADIN with a constant matrix prox `½‖x − z‖²_{B_i}` in the
    /// local subproblems.
    MatrixProxAladin,
    /// Consensus ADMM, dual update before aggregation.
    AdmmDualFirst,
    /// Consensus ADMM, aggregation before dual update.
    AdmmAggregateFirst,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::BfgsAladin,
        Algorithm::ReducedAladin,
        Algorithm::MatrixProxAladin,
        Algorithm::AdmmDualFirst,
        Algorithm::AdmmAggregateFirst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BfgsAladin => "bfgs-aladin",
            Algorithm::ReducedAladin => "reduced-aladin",
            Algorithm::MatrixProxAladin => "matrix-prox-aladin",
            Algorithm::AdmmDualFirst => "admm-dual-first",
            Algorithm::AdmmAggregateFirst => "admm-aggregate-first",
        }
    }

    pub fn is_aladin(self) -> bool {
        matches!(
            self,
            Algorithm::BfgsAladin | Algorithm::ReducedAladin | Algorithm::MatrixProxAladin
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
            })
    }
}
