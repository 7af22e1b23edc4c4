//! Little-endian binary containers: EGRD grids, EPCD point clouds and ESEG
//! segmentation models.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evidence::BeliefMass;
use crate::grid::{CellClass, DynamicMask, Eogm, Grid, GridConfig, Ogm, Pose2, Rgm, Sgm};
use crate::representation::PointCloud;

pub const EGRD_MAGIC: [u8; 4] = *b"EGRD";
pub const EPCD_MAGIC: [u8; 4] = *b"EPCD";
pub const ESEG_MAGIC: [u8; 4] = *b"ESEG";
pub const VERSION: u8 = 1;

/// EGRD payload kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Classes = 1,
    Binary = 2,
    Mass = 3,
    Probability = 4,
}

impl PayloadKind {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(PayloadKind::Classes),
            2 => Some(PayloadKind::Binary),
            3 => Some(PayloadKind::Mass),
            4 => Some(PayloadKind::Probability),
            _ => None,
        }
    }
}

/// Header fields shared by every grid file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMeta {
    pub config: GridConfig,
    pub timestamp: f64,
    pub pose: Pose2,
}

impl GridMeta {
    pub fn bare(config: GridConfig) -> Self {
        Self { config, timestamp: 0.0, pose: Pose2::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridPayload {
    Classes(Vec<CellClass>),
    Binary(Vec<bool>),
    Mass(Vec<BeliefMass>),
    Probability(Vec<f64>),
}

impl GridPayload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            GridPayload::Classes(_) => PayloadKind::Classes,
            GridPayload::Binary(_) => PayloadKind::Binary,
            GridPayload::Mass(_) => PayloadKind::Mass,
            GridPayload::Probability(_) => PayloadKind::Probability,
        }
    }

    fn len(&self) -> usize {
        match self {
            GridPayload::Classes(v) => v.len(),
            GridPayload::Binary(v) => v.len(),
            GridPayload::Mass(v) => v.len(),
            GridPayload::Probability(v) => v.len(),
        }
    }
}

/// A decoded EGRD file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub meta: GridMeta,
    pub payload: GridPayload,
}

impl GridFile {
    pub fn from_sgm(sgm: &Sgm) -> Self {
        Self {
            meta: GridMeta { config: sgm.grid.config, timestamp: sgm.timestamp, pose: sgm.pose },
            payload: GridPayload::Classes(sgm.grid.cells.clone()),
        }
    }

    pub fn from_eogm(eogm: &Eogm) -> Self {
        Self {
            meta: GridMeta { config: eogm.grid.config, timestamp: eogm.timestamp, pose: eogm.pose },
            payload: GridPayload::Mass(eogm.grid.cells.clone()),
        }
    }

    pub fn from_binary(grid: &Grid<bool>, timestamp: f64, pose: Pose2) -> Self {
        Self {
            meta: GridMeta { config: grid.config, timestamp, pose },
            payload: GridPayload::Binary(grid.cells.clone()),
        }
    }

    pub fn from_ogm(ogm: &Ogm, timestamp: f64, pose: Pose2) -> Self {
        Self {
            meta: GridMeta { config: ogm.grid.config, timestamp, pose },
            payload: GridPayload::Probability(ogm.grid.cells.clone()),
        }
    }

    fn wrong_kind(&self, want: PayloadKind) -> Error {
        Error::format("<grid>", 5, format!("expected payload kind {:?}, found {:?}", want, self.payload.kind()))
    }

    pub fn into_sgm(self) -> Result<Sgm> {
        match self.payload {
            GridPayload::Classes(cells) => Ok(Sgm {
                grid: Grid::from_cells(self.meta.config, cells)?,
                pose: self.meta.pose,
                timestamp: self.meta.timestamp,
            }),
            _ => Err(self.wrong_kind(PayloadKind::Classes)),
        }
    }

    pub fn into_eogm(self) -> Result<Eogm> {
        match self.payload {
            GridPayload::Mass(cells) => Ok(Eogm {
                grid: Grid::from_cells(self.meta.config, cells)?,
                pose: self.meta.pose,
                timestamp: self.meta.timestamp,
            }),
            _ => Err(self.wrong_kind(PayloadKind::Mass)),
        }
    }

    pub fn into_binary(self) -> Result<Grid<bool>> {
        match self.payload {
            GridPayload::Binary(cells) => Grid::from_cells(self.meta.config, cells),
            _ => Err(self.wrong_kind(PayloadKind::Binary)),
        }
    }

    pub fn into_mask(self) -> Result<DynamicMask> {
        Ok(DynamicMask { grid: self.into_binary()? })
    }

    pub fn into_rgm(self) -> Result<Rgm> {
        Ok(Rgm { grid: self.into_binary()? })
    }

    pub fn into_ogm(self) -> Result<Ogm> {
        match self.payload {
            GridPayload::Probability(cells) => Ok(Ogm { grid: Grid::from_cells(self.meta.config, cells)? }),
            _ => Err(self.wrong_kind(PayloadKind::Probability)),
        }
    }
}

pub fn encode_grid(file: &GridFile) -> Vec<u8> {
    let cfg = &file.meta.config;
    let mut out = Vec::with_capacity(53 + file.payload.len() * 8);
    out.extend_from_slice(&EGRD_MAGIC);
    out.push(VERSION);
    out.push(file.payload.kind() as u8);
    out.extend_from_slice(&cfg.width.to_le_bytes());
    out.extend_from_slice(&cfg.height.to_le_bytes());
    out.extend_from_slice(&cfg.resolution.to_le_bytes());
    out.extend_from_slice(&file.meta.timestamp.to_le_bytes());
    put_pose(&mut out, &file.meta.pose);
    match &file.payload {
        GridPayload::Classes(v) => out.extend(v.iter().map(|c| c.code())),
        GridPayload::Binary(v) => out.extend(v.iter().map(|&b| b as u8)),
        GridPayload::Mass(v) => {
            for m in v {
                out.extend_from_slice(&(m.m_o as f32).to_le_bytes());
                out.extend_from_slice(&(m.m_f as f32).to_le_bytes());
            }
        }
        GridPayload::Probability(v) => {
            for p in v {
                out.extend_from_slice(&(*p as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_grid(bytes: &[u8], name: &str) -> Result<GridFile> {
    let mut r = Reader::new(bytes, name);
    r.magic(&EGRD_MAGIC)?;
    r.version()?;
    let kind_at = r.pos;
    let kind = r.u8()?;
    let kind = PayloadKind::from_code(kind).ok_or_else(|| r.err_at(kind_at, format!("unknown payload kind {kind}")))?;
    let width = r.u32()?;
    let height = r.u32()?;
    let resolution = r.f32()?;
    let config = GridConfig { width, height, resolution };
    config.validate().map_err(|e| r.err_at(6, e.to_string()))?;
    let timestamp = r.f64()?;
    let pose = r.pose()?;
    let n = config.cell_count();
    let cap = n.min(bytes.len());
    let payload = match kind {
        PayloadKind::Classes => {
            let mut v = Vec::with_capacity(cap);
            for _ in 0..n {
                let at = r.pos;
                let code = r.u8()?;
                v.push(CellClass::from_code(code).ok_or_else(|| r.err_at(at, format!("invalid class code {code}")))?);
            }
            GridPayload::Classes(v)
        }
        PayloadKind::Binary => {
            let mut v = Vec::with_capacity(cap);
            for _ in 0..n {
                let at = r.pos;
                v.push(match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(r.err_at(at, format!("invalid binary value {b}"))),
                });
            }
            GridPayload::Binary(v)
        }
        PayloadKind::Mass => {
            let mut v = Vec::with_capacity(cap);
            for _ in 0..n {
                let at = r.pos;
                let m_o = r.f32()? as f64;
                let m_f = r.f32()? as f64;
                if !(m_o.is_finite() && m_f.is_finite()) {
                    return Err(r.err_at(at, "non-finite mass"));
                }
                v.push(BeliefMass::from_channels_lossy(m_o, m_f));
            }
            GridPayload::Mass(v)
        }
        PayloadKind::Probability => {
            let mut v = Vec::with_capacity(cap);
            for _ in 0..n {
                let at = r.pos;
                let p = r.f32()? as f64;
                if !(0.0..=1.0).contains(&p) {
                    return Err(r.err_at(at, format!("probability {p} outside [0, 1]")));
                }
                v.push(p);
            }
            GridPayload::Probability(v)
        }
    };
    r.finish()?;
    Ok(GridFile { meta: GridMeta { config, timestamp, pose }, payload })
}

pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(45 + cloud.points.len() * 12);
    out.extend_from_slice(&EPCD_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(cloud.points.len() as u32).to_le_bytes());
    out.extend_from_slice(&cloud.timestamp.to_le_bytes());
    put_pose(&mut out, &cloud.ego_pose);
    for p in &cloud.points {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8], name: &str) -> Result<PointCloud> {
    let mut r = Reader::new(bytes, name);
    r.magic(&EPCD_MAGIC)?;
    r.version()?;
    let count = r.u32()? as usize;
    let timestamp = r.f64()?;
    let ego_pose = r.pose()?;
    let mut points = Vec::with_capacity(count.min(bytes.len() / 12));
    for i in 0..count {
        let at = r.pos;
        if bytes.len().saturating_sub(at) < 12 {
            return Err(r.err_at(at, format!("truncated point {i} of {count}")));
        }
        let p = [r.f32()?, r.f32()?, r.f32()?];
        if p.iter().any(|v| !v.is_finite()) {
            return Err(r.err_at(at, "non-finite point coordinate"));
        }
        points.push(p);
    }
    r.finish()?;
    Ok(PointCloud { points, timestamp, ego_pose })
}

/// Raw ESEG contents: patch half-width and flat weights, bias last.
#[derive(Debug, Clone, PartialEq)]
pub struct SegModelFile {
    pub half_width: u32,
    pub weights: Vec<f64>,
}

pub fn encode_seg_model(model: &SegModelFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + model.weights.len() * 8);
    out.extend_from_slice(&ESEG_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&model.half_width.to_le_bytes());
    out.extend_from_slice(&(model.weights.len() as u32).to_le_bytes());
    for w in &model.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn decode_seg_model(bytes: &[u8], name: &str) -> Result<SegModelFile> {
    let mut r = Reader::new(bytes, name);
    r.magic(&ESEG_MAGIC)?;
    r.version()?;
    let half_width = r.u32()?;
    let count_at = r.pos;
    let count = r.u32()? as usize;
    let side = 2 * half_width as usize + 1;
    if count != side * side * 4 + 1 {
        return Err(r.err_at(count_at, format!("weight count {count} does not match half-width {half_width}")));
    }
    let mut weights = Vec::with_capacity(count.min(bytes.len() / 8));
    for _ in 0..count {
        let at = r.pos;
        let w = r.f64()?;
        if !w.is_finite() {
            return Err(r.err_at(at, "non-finite weight"));
        }
        weights.push(w);
    }
    r.finish()?;
    Ok(SegModelFile { half_width, weights })
}

pub fn write_grid(path: &Path, file: &GridFile) -> Result<()> {
    write_bytes(path, &encode_grid(file))
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    decode_grid(&read_bytes(path)?, &path.display().to_string())
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_bytes(path, &encode_cloud(cloud))
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    decode_cloud(&read_bytes(path)?, &path.display().to_string())
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn put_pose(out: &mut Vec<u8>, pose: &Pose2) {
    out.extend_from_slice(&pose.x.to_le_bytes());
    out.extend_from_slice(&pose.y.to_le_bytes());
    out.extend_from_slice(&pose.heading.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], name: &'a str) -> Self {
        Self { bytes, pos: 0, name }
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::format(self.name, offset as u64, msg)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(
                self.err_at(self.pos, format!("truncated: need {N} bytes, {} left", self.bytes.len() - self.pos))
            );
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(buf)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take::<4>()?;
        if &got != expected {
            return Err(self.err_at(0, format!("bad magic {:?}", String::from_utf8_lossy(&got))));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u8()?;
        if v != VERSION {
            return Err(self.err_at(4, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn pose(&mut self) -> Result<Pose2> {
        let at = self.pos;
        let pose = Pose2 { x: self.f64()?, y: self.f64()?, heading: self.f64()? };
        if !pose.is_finite() {
            return Err(self.err_at(at, "non-finite pose"));
        }
        Ok(pose)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err_at(self.pos, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}
