use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Layout {
    /// `D` equal angular sectors of the inner disk `{r <= r0}`.
    EqualSectors,
    /// `rings` equally spaced annuli of the inner disk, each cut into `sectors` sectors.
    AnnularSectors { rings: usize, sectors: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Number of unknown regions `D`.
    pub regions: usize,
    /// Radius of the inner zone; `{r0 < r <= 1}` belongs to the collar region 0.
    pub r0: f64,
    pub layout: Layout,
}

/// Region classifier for `Omega_0, ..., Omega_D`.
///
/// The inner disk is split into radial bands `[band_radii[b], band_radii[b+1]]`,
/// each cut into `sectors` equal sectors starting at angle 0. Region
/// `1 + b * sectors + s` is sector `s` of band `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    spec: PartitionSpec,
    band_radii: Vec<f64>,
    sectors: usize,
}

pub fn build_partition(spec: &PartitionSpec) -> Result<Partition> {
    if spec.regions == 0 {
        return Err(EitError::InvalidInput("number of regions D must be >= 1".into()));
    }
    if !(spec.r0 > 0.0 && spec.r0 < 1.0) {
        return Err(EitError::InvalidInput(format!("r0 must lie in (0, 1), got {}", spec.r0)));
    }
    let (rings, sectors) = match spec.layout {
        Layout::EqualSectors => (1, spec.regions),
        Layout::AnnularSectors { rings, sectors } => {
            if rings == 0 || sectors == 0 {
                return Err(EitError::InvalidInput("annular layout needs rings >= 1 and sectors >= 1".into()));
            }
            if rings * sectors != spec.regions {
                return Err(EitError::InvalidInput(format!(
                    "layout has {rings} x {sectors} = {} regions but D = {}",
                    rings * sectors,
                    spec.regions
                )));
            }
            (rings, sectors)
        }
    };
    let band_radii = (0..=rings).map(|b| spec.r0 * b as f64 / rings as f64).collect();
    Ok(Partition { spec: spec.clone(), band_radii, sectors })
}

impl Partition {
    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    pub fn regions(&self) -> usize {
        self.spec.regions
    }

    pub fn r0(&self) -> f64 {
        self.spec.r0
    }

    /// Radii `0 = R_0 < R_1 < ... < R_rings = r0` of the inner bands.
    pub fn band_radii(&self) -> &[f64] {
        &self.band_radii
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn region_of(&self, band: usize, sector: usize) -> usize {
        1 + band * self.sectors + sector
    }

    /// Region containing `(x, y)`, or `None` outside the closed unit disk.
    ///
    /// Points on interfaces are assigned with half-open conventions
    /// (bands `[R_b, R_{b+1})`, sectors `[a_s, a_{s+1})`), the outer radius
    /// `r0` itself belonging to the inner zone.
    pub fn classify(&self, x: f64, y: f64) -> Option<usize> {
        let r = x.hypot(y);
        if r > 1.0 + 1e-12 {
            return None;
        }
        if r > self.spec.r0 {
            return Some(0);
        }
        let rings = self.band_radii.len() - 1;
        let band = self.band_radii[1..rings].iter().take_while(|&&rb| r >= rb).count();
        let mut angle = y.atan2(x);
        if angle < 0.0 {
            angle += 2.0 * PI;
        }
        let sector = ((angle / (2.0 * PI) * self.sectors as f64).floor() as usize).min(self.sectors - 1);
        Some(self.region_of(band, sector))
    }

    /// Exact area of region `k` (region 0 is the collar `{r0 < r < 1}`).
    pub fn region_area(&self, k: usize) -> f64 {
        assert!(k <= self.spec.regions, "region index out of range");
        if k == 0 {
            return PI * (1.0 - self.spec.r0 * self.spec.r0);
        }
        let band = (k - 1) / self.sectors;
        let (ra, rb) = (self.band_radii[band], self.band_radii[band + 1]);
        PI * (rb * rb - ra * ra) / self.sectors as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(regions: usize, r0: f64, layout: Layout) -> PartitionSpec {
        PartitionSpec { regions, r0, layout }
    }

    #[test]
    fn single_region_is_inner_disk() {
        let p = build_partition(&spec(1, 0.75, Layout::EqualSectors)).unwrap();
        assert!((p.region_area(1) - PI * 0.75 * 0.75).abs() < 1e-14);
        assert!((p.region_area(1) - 1.76715).abs() < 1e-5);
        assert_eq!(p.classify(0.1, 0.2), Some(1));
        assert_eq!(p.classify(0.8, 0.0), Some(0));
        assert_eq!(p.classify(1.1, 0.0), None);
    }

    #[test]
    fn two_sectors_are_half_disks() {
        let p = build_partition(&spec(2, 0.75, Layout::EqualSectors)).unwrap();
        for k in 1..=2 {
            assert!((p.region_area(k) - PI * 0.5625 / 2.0).abs() < 1e-14);
        }
        assert_eq!(p.classify(0.0, 0.3), Some(1));
        assert_eq!(p.classify(0.0, -0.3), Some(2));
    }

    #[test]
    fn annular_sectors_areas_add_up() {
        let p = build_partition(&spec(4, 0.8, Layout::AnnularSectors { rings: 2, sectors: 2 })).unwrap();
        let inner: f64 = (1..=4).map(|k| p.region_area(k)).sum();
        assert!((inner - PI * 0.64).abs() < 1e-12);
        assert!(p.region_area(1) > 0.0 && p.region_area(4) > 0.0);
        assert_eq!(p.classify(0.1, 0.1), Some(1));
        assert_eq!(p.classify(0.1, -0.1), Some(2));
        assert_eq!(p.classify(0.5, 0.1), Some(3));
        assert_eq!(p.classify(0.5, -0.1), Some(4));
    }

    #[test]
    fn total_area_is_pi() {
        for (d, layout) in [
            (1, Layout::EqualSectors),
            (3, Layout::EqualSectors),
            (6, Layout::AnnularSectors { rings: 3, sectors: 2 }),
        ] {
            let p = build_partition(&spec(d, 0.6, layout)).unwrap();
            let total: f64 = (0..=d).map(|k| p.region_area(k)).sum();
            assert!((total - PI).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_partition(&spec(0, 0.75, Layout::EqualSectors)).is_err());
        assert!(build_partition(&spec(2, 1.0, Layout::EqualSectors)).is_err());
        assert!(build_partition(&spec(2, 0.0, Layout::EqualSectors)).is_err());
        assert!(build_partition(&spec(3, 0.7, Layout::AnnularSectors { rings: 2, sectors: 2 })).is_err());
    }
}
