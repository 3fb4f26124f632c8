//! Names accepted by `apply`.

use anyhow::anyhow;
use onesided::operators::KernelSpec;
use onesided::orlicz::YoungFunction;
use onesided::verify::Expr;
use onesided::{Direction, WindowPolicy};

pub const OPERATOR_HELP: &str = "m_plus, m_minus, m_plus_dyadic, sharp, sharp_all, s_plus, o_plus, \
orlicz:<young>, tstar:<kernel>, or a kernel (difftrans:..., frac:..., table:...)";

fn maximal(direction: Direction, policy: WindowPolicy) -> Expr {
    Expr::Maximal {
        of: Box::new(Expr::Identity),
        direction,
        delta: 1.0,
        policy,
        times: 1,
    }
}

pub fn parse_operator(name: &str) -> anyhow::Result<Expr> {
    let of = || Box::new(Expr::Identity);
    Ok(match name {
        "m_plus" => maximal(Direction::Forward, WindowPolicy::AllLengths),
        "m_minus" => maximal(Direction::Backward, WindowPolicy::AllLengths),
        "m_plus_dyadic" => maximal(Direction::Forward, WindowPolicy::DyadicLengths),
        "sharp" => Expr::sharp(Expr::Identity, WindowPolicy::DyadicLengths),
        "sharp_all" => Expr::sharp(Expr::Identity, WindowPolicy::AllLengths),
        "s_plus" => Expr::Square { of: of(), range: None },
        "o_plus" => Expr::Oscillation {
            of: of(),
            range: None,
            samples: 4,
        },
        _ => {
            if let Some(young) = name.strip_prefix("orlicz:") {
                Expr::Orlicz {
                    of: of(),
                    young: young.parse::<YoungFunction>()?,
                }
            } else if let Some(kernel) = name.strip_prefix("tstar:") {
                Expr::MaximalTruncated {
                    of: of(),
                    kernel: kernel.parse::<KernelSpec>()?,
                }
            } else {
                let kernel = name
                    .parse::<KernelSpec>()
                    .map_err(|e| anyhow!("unknown operator {name:?} ({e}); expected {OPERATOR_HELP}"))?;
                Expr::apply(Expr::Identity, kernel)
            }
        }
    })
}
