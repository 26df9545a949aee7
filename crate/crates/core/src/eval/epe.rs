use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face_model::Region;
use crate::flow::{FlowField, Mask};
use crate::raster::DepthMap;

/// Regions used for vertex-based evaluation unless overridden.
pub const VERTEX_EVAL_REGIONS: [Region; 3] = [Region::Lips, Region::Cheeks, Region::Eyes];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStat {
    pub epe: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub aggregate: f64,
    pub count: usize,
    pub regions: BTreeMap<String, RegionStat>,
    pub mask_source: String,
}

fn check_same_size(a: &FlowField, b: &FlowField) -> Result<()> {
    if !a.same_size(b) {
        return Err(Error::Shape(format!(
            "flow sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Mean endpoint error over pixels selected by `mask` where both flows are valid.
pub fn masked_epe(pred: &FlowField, gt: &FlowField, mask: &Mask) -> Result<EvalReport> {
    check_same_size(pred, gt)?;
    if (mask.width, mask.height) != (gt.width, gt.height) {
        return Err(Error::Shape("mask size differs from flow size".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..gt.data.len() {
        if mask.bits[i] && pred.valid[i] && gt.valid[i] {
            let du = pred.data[i][0] as f64 - gt.data[i][0] as f64;
            let dv = pred.data[i][1] as f64 - gt.data[i][1] as f64;
            sum += du.hypot(dv);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain("evaluation mask selects no valid pixels".into()));
    }
    Ok(EvalReport { aggregate: sum / count as f64, count, regions: BTreeMap::new(), mask_source: "mask".into() })
}

/// Foreground pixels: `depth < background_depth - eps`.
pub fn depth_mask(depth: &DepthMap, background_depth: f64, eps: f64) -> Result<Mask> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("depth mask epsilon must be positive, got {eps}")));
    }
    let cut = background_depth - eps;
    Mask::new(depth.width, depth.height, depth.data.iter().map(|&d| (d as f64) < cut).collect())
}

/// A landmark or vertex observed in both frames, in pixel coordinates where
/// pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub id: String,
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub region: Option<Region>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    #[serde(default)]
    region: Option<String>,
}

/// Reads a CSV with header `id,x1,y1,x2,y2,region`; the region column may be empty.
pub fn read_correspondences(path: impl AsRef<Path>) -> Result<Vec<Correspondence>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::format("correspondences", format!("row {}: {e}", line + 1)))?;
        let region = match row.region.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(
                Region::parse(s)
                    .ok_or_else(|| Error::format("correspondences", format!("row {}: unknown region {s:?}", line + 1)))?,
            ),
        };
        out.push(Correspondence { id: row.id, c1: [row.x1, row.y1], c2: [row.x2, row.y2], region });
    }
    Ok(out)
}

/// Bilinear flow sample at a continuous pixel coordinate. Points within half
/// a pixel of the border use the nearest row/column.
pub fn sample_bilinear(flow: &FlowField, p: [f64; 2]) -> Result<[f64; 2]> {
    let (w, h) = (flow.width as f64, flow.height as f64);
    if !(p[0] >= 0.0 && p[0] <= w && p[1] >= 0.0 && p[1] <= h) {
        return Err(Error::Domain(format!("point ({}, {}) outside {}x{}", p[0], p[1], flow.width, flow.height)));
    }
    let fx = (p[0] - 0.5).clamp(0.0, w - 1.0);
    let fy = (p[1] - 0.5).clamp(0.0, h - 1.0);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let x1 = (x0 + 1).min(flow.width - 1);
    let y1 = (y0 + 1).min(flow.height - 1);
    let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
    let mut out = [0.0; 2];
    for (x, y, wgt) in [
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x1, y0, ax * (1.0 - ay)),
        (x0, y1, (1.0 - ax) * ay),
        (x1, y1, ax * ay),
    ] {
        if wgt == 0.0 {
            continue;
        }
        let i = flow.index(x, y);
        if !flow.valid[i] {
            return Err(Error::Domain(format!("point ({}, {}) samples invalid flow", p[0], p[1])));
        }
        out[0] += wgt * flow.data[i][0] as f64;
        out[1] += wgt * flow.data[i][1] as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkOptions {
    /// Use `C1 - C2` as the reference displacement instead of `C2 - C1`.
    pub literal_sign: bool,
    /// Keep only points tagged with one of these regions.
    pub regions: Option<Vec<Region>>,
}

/// Mean of `|(C2 - C1) - Flow(C1)|` over the correspondences, with per-region means.
pub fn landmark_epe(flow: &FlowField, corr: &[Correspondence], opts: &LandmarkOptions) -> Result<EvalReport> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut regions: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (i, c) in corr.iter().enumerate() {
        if let Some(keep) = &opts.regions {
            if !c.region.is_some_and(|r| keep.contains(&r)) {
                continue;
            }
        }
        let f = sample_bilinear(flow, c.c1)
            .map_err(|e| Error::Domain(format!("correspondence {i} (id {}): {e}", c.id)))?;
        let d = if opts.literal_sign {
            [c.c1[0] - c.c2[0], c.c1[1] - c.c2[1]]
        } else {
            [c.c2[0] - c.c1[0], c.c2[1] - c.c1[1]]
        };
        let e = (d[0] - f[0]).hypot(d[1] - f[1]);
        sum += e;
        count += 1;
        if let Some(r) = c.region {
            let slot = regions.entry(r.name().to_string()).or_default();
            slot.0 += e;
            slot.1 += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain("no correspondences to evaluate".into()));
    }
    Ok(EvalReport {
        aggregate: sum / count as f64,
        count,
        regions: regions.into_iter().map(|(k, (s, n))| (k, RegionStat { epe: s / n as f64, count: n })).collect(),
        mask_source: "correspondences".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_epe_examples() {
        let gt = FlowField::zeros(4, 3);
        let pred = FlowField::from_fn(4, 3, |_, _| [3.0, 4.0]);
        let full = Mask::full(4, 3);
        assert_eq!(masked_epe(&gt, &gt, &full).unwrap().aggregate, 0.0);
        assert_eq!(masked_epe(&pred, &gt, &full).unwrap().aggregate, 5.0);

        let pred = FlowField::from_fn(2, 1, |x, _| [x as f32 + 1.0, 0.0]);
        let report = masked_epe(&pred, &FlowField::zeros(2, 1), &Mask::full(2, 1)).unwrap();
        assert_eq!(report.aggregate, 1.5);
        assert_eq!(report.count, 2);
    }

    #[test]
    fn masked_epe_errors() {
        let gt = FlowField::zeros(4, 3);
        assert!(matches!(masked_epe(&gt, &gt, &Mask::empty(4, 3)), Err(Error::Domain(_))));
        assert!(matches!(masked_epe(&FlowField::zeros(3, 3), &gt, &Mask::full(4, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn invalid_pixels_are_skipped() {
        let mut gt = FlowField::zeros(2, 1);
        gt.set_invalid(0);
        let pred = FlowField::from_fn(2, 1, |_, _| [0.0, 2.0]);
        assert_eq!(masked_epe(&pred, &gt, &Mask::full(2, 1)).unwrap().count, 1);
    }

    #[test]
    fn depth_mask_examples() {
        let bg = DepthMap::filled(3, 2, 1.0);
        assert_eq!(depth_mask(&bg, 1.0, 1e-4).unwrap().count(), 0);
        let mut d = bg.clone();
        d.data[1] = 0.5;
        assert_eq!(depth_mask(&d, 1.0, 1e-4).unwrap().bits, vec![false, true, false, false, false, false]);
        assert_eq!(depth_mask(&d, 1.0, 0.6).unwrap().count(), 0);
        assert!(depth_mask(&d, 1.0, 0.0).is_err());
    }

    fn corr(id: &str, c1: [f64; 2], c2: [f64; 2], region: Option<Region>) -> Correspondence {
        Correspondence { id: id.into(), c1, c2, region }
    }

    #[test]
    fn three_landmarks_mean_residual_one() {
        let flow = FlowField::zeros(8, 8);
        let pts = vec![
            corr("a", [2.5, 2.5], [2.5, 2.5], Some(Region::Lips)),
            corr("b", [3.5, 1.5], [4.5, 1.5], Some(Region::Lips)),
            corr("c", [1.0, 6.0], [1.0, 4.0], Some(Region::Eyes)),
        ];
        let r = landmark_epe(&flow, &pts, &LandmarkOptions::default()).unwrap();
        assert!((r.aggregate - 1.0).abs() < 1e-12);
        assert_eq!(r.regions["lips"], RegionStat { epe: 0.5, count: 2 });
        assert_eq!(r.regions["eyes"], RegionStat { epe: 2.0, count: 1 });
        let weighted: f64 = r.regions.values().map(|s| s.epe * s.count as f64).sum::<f64>() / r.count as f64;
        assert!((weighted - r.aggregate).abs() < 1e-12);
    }

    #[test]
    fn exact_displacement_gives_zero() {
        let flow = FlowField::from_fn(6, 5, |_, _| [1.25, -0.5]);
        let pts: Vec<_> = (0..5).map(|i| corr("p", [0.75 + i as f64, 1.25], [2.0 + i as f64, 0.75], None)).collect();
        assert_eq!(landmark_epe(&flow, &pts, &LandmarkOptions::default()).unwrap().aggregate, 0.0);
        let literal = LandmarkOptions { literal_sign: true, ..Default::default() };
        assert!((landmark_epe(&flow, &pts, &literal).unwrap().aggregate - 2.0 * 1.25f64.hypot(0.5)).abs() < 1e-12);
    }

    #[test]
    fn bilinear_midpoint_of_four_cells() {
        let flow = FlowField::from_fn(2, 2, |x, y| [x as f32, y as f32]);
        assert_eq!(sample_bilinear(&flow, [1.0, 1.0]).unwrap(), [0.5, 0.5]);
        let pts = vec![corr("m", [1.0, 1.0], [1.5, 1.5], None)];
        assert_eq!(landmark_epe(&flow, &pts, &LandmarkOptions::default()).unwrap().aggregate, 0.0);
    }

    #[test]
    fn out_of_bounds_names_the_index() {
        let flow = FlowField::zeros(4, 4);
        let pts = vec![corr("ok", [1.0, 1.0], [1.0, 1.0], None), corr("bad", [4.5, 1.0], [1.0, 1.0], None)];
        match landmark_epe(&flow, &pts, &LandmarkOptions::default()) {
            Err(Error::Domain(m)) => assert!(m.contains("correspondence 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn region_filter() {
        let flow = FlowField::zeros(4, 4);
        let pts = vec![
            corr("a", [1.0, 1.0], [2.0, 1.0], Some(Region::Lips)),
            corr("b", [1.0, 1.0], [4.0, 1.0], Some(Region::Forehead)),
            corr("c", [1.0, 1.0], [4.0, 1.0], None),
        ];
        let opts = LandmarkOptions { regions: Some(VERTEX_EVAL_REGIONS.to_vec()), ..Default::default() };
        let r = landmark_epe(&flow, &pts, &opts).unwrap();
        assert_eq!((r.aggregate, r.count), (1.0, 1));
    }

    #[test]
    fn csv_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "id,x1,y1,x2,y2,region\n0,1.5,2.5,3,4,lips\n1, 2, 2, 2, 2,\n").unwrap();
        let c = read_correspondences(&p).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].region, Some(Region::Lips));
        assert_eq!(c[1].region, None);
        assert_eq!(c[1].c2, [2.0, 2.0]);
        std::fs::write(&p, "id,x1,y1,x2,y2,region\n0,1,2,3,4,elbow\n").unwrap();
        assert!(read_correspondences(&p).is_err());
    }
}
