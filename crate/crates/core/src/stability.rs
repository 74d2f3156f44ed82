//! Linear stability of the composed flow and of plain BDF on uniform grids.
//!
//! For `y′ = λy` and `z = λτ`, the composed flow's characteristic
//! polynomial is `Σᵢ Θ_{p−i} ω^i` with
//! `Θ₀ = (α₁z − g₀)(G₀ − α₂z)`, `Θᵢ = G₁gᵢ + (α₁z − g₀)G_{i+1}` and
//! `Θ_p = G₁g_p`.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::bdf::coeff_fixed;
use crate::composition::CompositionSetup;
use crate::par::{self, Exec};
use crate::polyroot::{find_roots, ComplexPolynomial};
use crate::{Error, Result, C64};

const BOUNDARY_TOL: f64 = 1e-9;
pub const ANGLE_TOL_DEG: f64 = 0.05;
pub const RAY_SAMPLES: usize = 200;

#[derive(Debug, Clone)]
pub enum StabilityModel {
    /// Composed flow built on base order `p`; its order is `p + 1`.
    Composed(CompositionSetup),
    /// Plain BDF weights `g₀..g_q`.
    Bdf(Vec<f64>),
}

impl StabilityModel {
    /// Composed flow of order `q ∈ 2..=9`.
    pub fn composed(q: usize) -> Result<Self> {
        if !(2..=9).contains(&q) {
            return Err(Error::OrderOutOfRange(q));
        }
        Ok(StabilityModel::Composed(CompositionSetup::uniform(q - 1)?))
    }

    /// Plain BDF of order `q ∈ 1..=6`.
    pub fn bdf(q: usize) -> Result<Self> {
        if !(1..=6).contains(&q) {
            return Err(Error::OrderOutOfRange(q));
        }
        Ok(StabilityModel::Bdf(
            coeff_fixed(q)?.weights.iter().map(|g| g.re).collect(),
        ))
    }

    pub fn order(&self) -> usize {
        match self {
            StabilityModel::Composed(s) => s.p + 1,
            StabilityModel::Bdf(g) => g.len() - 1,
        }
    }

    /// Characteristic polynomial in `ω`, ascending.
    pub fn char_poly(&self, z: C64) -> ComplexPolynomial {
        match self {
            StabilityModel::Composed(s) => {
                let mut th = theta_with(s, z);
                th.reverse();
                ComplexPolynomial::new(th)
            }
            StabilityModel::Bdf(g) => {
                // Σ gⱼ ω^{q−j} = z ω^q
                let mut c: Vec<C64> = g.iter().rev().map(|&x| C64::new(x, 0.0)).collect();
                let q = g.len() - 1;
                c[q] -= z;
                ComplexPolynomial::new(c)
            }
        }
    }

    pub fn max_root_modulus(&self, z: C64) -> Result<f64> {
        let poly = self.char_poly(z);
        if poly.degree() == 0 {
            return Ok(0.0);
        }
        Ok(find_roots(&poly)?
            .iter()
            .map(|w| w.norm())
            .fold(0.0, f64::max))
    }

    pub fn is_stable(&self, z: C64) -> Result<bool> {
        Ok(self.max_root_modulus(z)? <= 1.0 + BOUNDARY_TOL)
    }
}

pub fn theta_with(s: &CompositionSetup, z: C64) -> Vec<C64> {
    let p = s.p;
    let (a, g, gg) = (s.alpha1, &s.g, &s.big_g);
    let lead = a * z - g[0];
    let mut th = Vec::with_capacity(p + 1);
    th.push(lead * (gg[0] - s.alpha2 * z));
    for i in 1..p {
        th.push(gg[1] * g[i] + lead * gg[i + 1]);
    }
    th.push(gg[1] * g[p]);
    th
}

/// `Θ₀..Θ_p` for base order `p` on the uniform grid.
pub fn theta_coefficients(p: usize, z: C64) -> Result<Vec<C64>> {
    Ok(theta_with(&CompositionSetup::uniform(p)?, z))
}

/// Stability of the composed flow of base order `p` at `z`.
pub fn is_stable_point(p: usize, z: C64) -> Result<bool> {
    StabilityModel::Composed(CompositionSetup::uniform(p)?).is_stable(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRegion {
    /// Order of the analysed scheme.
    pub order: usize,
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// `mask[iy][ix]`, with `iy = 0` at the bottom (`ymin`) row.
    pub mask: Vec<Vec<bool>>,
    pub angle_deg: Option<f64>,
}

impl StabilityRegion {
    pub fn cell_center(&self, ix: usize, iy: usize) -> C64 {
        cell_center(&self.bounds, self.nx, self.ny, ix, iy)
    }

    pub fn stable_count(&self) -> usize {
        self.mask.iter().flatten().filter(|&&b| b).count()
    }
}

fn cell_center(b: &Bounds, nx: usize, ny: usize, ix: usize, iy: usize) -> C64 {
    let dx = (b.xmax - b.xmin) / nx as f64;
    let dy = (b.ymax - b.ymin) / ny as f64;
    C64::new(
        b.xmin + (ix as f64 + 0.5) * dx,
        b.ymin + (iy as f64 + 0.5) * dy,
    )
}

pub fn region_raster(
    model: &StabilityModel,
    bounds: Bounds,
    nx: usize,
    ny: usize,
    exec: Exec,
) -> Result<StabilityRegion> {
    assert!(nx >= 2 && ny >= 2, "raster needs at least 2×2 cells");
    let flat = par::map_range(exec, nx * ny, |k| {
        model.is_stable(cell_center(&bounds, nx, ny, k % nx, k / nx))
    });
    let flat: Vec<bool> = flat.into_iter().collect::<Result<_>>()?;
    let mask = flat.chunks(nx).map(|row| row.to_vec()).collect();
    Ok(StabilityRegion {
        order: model.order(),
        bounds,
        nx,
        ny,
        mask,
        angle_deg: None,
    })
}

fn radii() -> Vec<f64> {
    let n = RAY_SAMPLES;
    (0..n)
        .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / (n - 1) as f64))
        .collect()
}

/// True if every sampled point on the rays `arg z = π ± θ` is stable.
pub fn sector_ok(model: &StabilityModel, theta: f64, exec: Exec) -> bool {
    let r = radii();
    let n = r.len();
    par::all_range(exec, 2 * n, |k| {
        let s = if k < n { 1.0 } else { -1.0 };
        let z = C64::from_polar(r[k % n], PI - s * theta);
        model.is_stable(z).unwrap_or(false)
    })
}

/// Largest `θ` in degrees whose sector lies in the stable set.
pub fn stability_angle(model: &StabilityModel, exec: Exec) -> Result<f64> {
    if sector_ok(model, PI / 2.0 - 1e-9, exec) {
        return Ok(90.0);
    }
    if !sector_ok(model, 1e-6, exec) {
        return Err(Error::EmptySector);
    }
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    while (hi - lo).to_degrees() > ANGLE_TOL_DEG {
        let mid = 0.5 * (lo + hi);
        if sector_ok(model, mid, exec) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.to_degrees())
}

pub fn write_csv<W: Write>(region: &StabilityRegion, mut w: W) -> io::Result<()> {
    writeln!(w, "re_z,im_z,stable")?;
    for iy in 0..region.ny {
        for ix in 0..region.nx {
            let z = region.cell_center(ix, iy);
            let s = u8::from(region.mask[iy][ix]);
            writeln!(
                w,
                "{},{},{}",
                crate::output::sci(z.re),
                crate::output::sci(z.im),
                s
            )?;
        }
    }
    Ok(())
}

/// Plain PBM with `1` for stable cells and the top row at `ymax`.
pub fn write_pbm<W: Write>(region: &StabilityRegion, mut w: W) -> io::Result<()> {
    writeln!(w, "P1")?;
    writeln!(w, "{} {}", region.nx, region.ny)?;
    for row in region.mask.iter().rev() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
