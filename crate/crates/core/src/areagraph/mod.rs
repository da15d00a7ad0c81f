//! 2D area graph over a region's footprint: Voronoi waypoints, a pruned
//! topology graph, areas labeled by their nearest chain, and alpha-shape
//! merging of over-segmented rooms.

pub mod alpha;
pub mod areas;
pub mod map;
pub mod polygon;
pub mod subdivide;
pub mod topology;
pub mod voronoi;

pub use alpha::{alpha_merge, alpha_shape_edges, AlphaMerge};
pub use areas::{area_graph, AreaGraph2D, AreaPassage};
pub use map::{project_region, GridMap2D};
pub use subdivide::{subdivide_region, subdivide_storey, StoreyHierarchy, Subdivision};
pub use topology::{topology_graph, TopologyGraph2D};
pub use voronoi::{voronoi, VoronoiDiagram2D, Waypoint};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaGraphParams {
    /// Spurs shorter than this many cells are pruned.
    pub prune_len: usize,
    /// Site distance tolerance for Voronoi waypoints, in cells.
    pub voronoi_tol: f64,
    /// Meters. Wider than the widest corridor, narrower than the narrowest room.
    pub alpha: f64,
    pub merge_fraction: f64,
}

impl Default for AreaGraphParams {
    fn default() -> Self {
        AreaGraphParams {
            prune_len: 4,
            voronoi_tol: 1.0,
            alpha: 2.5,
            merge_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSegmentation {
    pub map: GridMap2D,
    pub topology: TopologyGraph2D,
    pub areas: AreaGraph2D,
    pub warnings: Vec<String>,
}

/// Voronoi skeleton, topology graph, areas and alpha merge of one map.
pub fn segment_map(map: &GridMap2D, p: &AreaGraphParams) -> RegionSegmentation {
    let vd = voronoi(map, p.voronoi_tol);
    let topology = topology_graph(&vd, p.prune_len);
    let raw = area_graph(&topology, map);
    let merged = alpha_merge(&raw, map, p.alpha, p.merge_fraction);
    RegionSegmentation {
        map: map.clone(),
        topology,
        areas: merged.graph,
        warnings: merged.warning.into_iter().collect(),
    }
}
