//! Text listing of the built-in entry laws.

use wignerlab_core::cumulants::SymmetryClass;
use wignerlab_core::ensembles::EntryDistribution;
use wignerlab_core::C64;

/// Up to 12 significant digits, trailing zeros dropped.
fn num(x: f64) -> String {
    if x.abs() < 1e-12 {
        return "0".into();
    }
    let digits = (11 - x.abs().log10().floor() as i32).clamp(0, 17) as usize;
    let s = format!("{x:.digits$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn complex(z: C64) -> String {
    match (z.re.abs() < 1e-12, z.im.abs() < 1e-12) {
        (_, true) => num(z.re),
        (true, false) => format!("{}i", num(z.im)),
        (false, false) => format!("{}{}{}i", num(z.re), if z.im < 0.0 { "-" } else { "+" }, num(z.im.abs())),
    }
}

/// `name: κ^{(p,q)}=v, ..., τ=t` listing the nonzero analytic cumulants of
/// order 2 through 4.
pub fn describe(d: &EntryDistribution) -> String {
    let mut parts = Vec::new();
    if let Some(t) = d.analytic_cumulants() {
        let mut entries: Vec<_> = t.iter().collect();
        entries.sort_by_key(|&((p, q), _)| (p + q, std::cmp::Reverse(p)));
        for ((p, q), v) in entries {
            if p + q < 2 || v.norm() < 1e-12 {
                continue;
            }
            let idx = match d.symmetry_class() {
                SymmetryClass::Complex => format!("{p},{q}"),
                SymmetryClass::Real => format!("{p}"),
            };
            parts.push(format!("κ^{{({idx})}}={}", complex(v)));
        }
    }
    parts.push(format!("τ={}", complex(d.second_moment_twist())));
    format!("{}: {}", d.name(), parts.join(", "))
}

pub fn listing() -> String {
    let mut out = String::new();
    for d in EntryDistribution::builtins() {
        out += &describe(&d);
        out.push('\n');
    }
    out
}
