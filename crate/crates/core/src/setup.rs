use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::{region_stiffness, RegionStiffness};
use crate::forward::{CondensedForward, FemForward};
use crate::geometry::{build_partition, mesh_disk_with, place_electrodes, ElectrodeSet, Mesh, MeshParams, Partition, PartitionSpec};
use crate::param::ParameterBox;

/// Everything that fixes the forward map: geometry, mesh, electrodes and `Theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub partition: PartitionSpec,
    pub target_h: f64,
    pub electrodes: usize,
    pub coverage: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl ProblemSpec {
    /// Unit disk, `r0 = 0.75`, two half-disk sectors, 16 electrodes covering
    /// the whole boundary, `Theta = [0.5, 4]^2`, `h = 0.05`.
    pub fn reference() -> Self {
        Self {
            partition: PartitionSpec { regions: 2, r0: 0.75, layout: crate::geometry::Layout::EqualSectors },
            target_h: 0.05,
            electrodes: 16,
            coverage: 1.0,
            gamma_min: 0.5,
            gamma_max: 4.0,
        }
    }
}

pub struct ProblemSetup {
    pub spec: ProblemSpec,
    pub partition: Partition,
    pub mesh: Mesh,
    pub electrodes: ElectrodeSet,
    pub stiffness: RegionStiffness,
    pub space: ParameterBox,
}

impl ProblemSetup {
    /// Meshes with boundary vertex counts divisible by `M`, so equally spaced
    /// electrode endpoints fall on vertices without snapping.
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        let partition = build_partition(&spec.partition)?;
        let params = MeshParams { target_h: spec.target_h, boundary_multiple: spec.electrodes.max(1) };
        let mesh = mesh_disk_with(&partition, &params)?;
        let electrodes = place_electrodes(&mesh, spec.electrodes, spec.coverage)?;
        let stiffness = region_stiffness(&mesh);
        let space = ParameterBox::new(spec.partition.regions, spec.gamma_min, spec.gamma_max)?;
        Ok(Self { spec: spec.clone(), partition, mesh, electrodes, stiffness, space })
    }

    pub fn fem_forward(&self) -> Result<FemForward> {
        FemForward::new(self.mesh.clone(), &self.electrodes, self.stiffness.clone(), self.space.clone())
    }

    pub fn condensed_forward(&self) -> Result<CondensedForward> {
        CondensedForward::new(&self.mesh, &self.electrodes, &self.stiffness, self.space.clone())
    }
}
