//! File formats: trained point clouds, camera descriptions, images and CSV
//! reports.
//!
//! Point clouds are the binary little-endian PLY variant exported by 3DGS
//! training code. Images are binary P6 pixmaps quantized with round half up,
//! so a channel value of `0.5` becomes byte `128`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use texsplat_core::gs::{Camera, FrameBuffer, Gaussian3D};
use texsplat_core::texture::{AccessEvent, AccessKind, AccessSink};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: missing property `{property}`")]
    MissingProperty { path: PathBuf, property: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Core {
        path: PathBuf,
        #[source]
        source: texsplat_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// PLY

/// Number of higher-order SH scalars per point (15 coefficients x 3 channels).
pub const SH_REST: usize = 45;

/// One point as stored in the file, before activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyPoint {
    pub position: [f32; 3],
    pub f_dc: [f32; 3],
    /// Channel-major: `f_rest[c * 15 + k]` is coefficient `k + 1` of channel `c`.
    pub f_rest: [f32; SH_REST],
    pub opacity_logit: f32,
    pub log_scale: [f32; 3],
    /// `(w, x, y, z)`, not necessarily normalized.
    pub rotation: [f32; 4],
}

impl Default for PlyPoint {
    fn default() -> Self {
        PlyPoint {
            position: [0.0; 3],
            f_dc: [0.0; 3],
            f_rest: [0.0; SH_REST],
            opacity_logit: 0.0,
            log_scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

/// Property names in the order the 3DGS exporter writes them.
pub fn required_properties() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..SH_REST).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f32 {
        match self {
            Scalar::I8 => b[0] as i8 as f32,
            Scalar::U8 => b[0] as f32,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f32,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f32,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()) as f32,
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
}

impl Element {
    fn stride(&self) -> usize {
        self.props.iter().map(|p| p.1.size()).sum()
    }
}

fn read_header(path: &Path, r: &mut impl BufRead) -> Result<Vec<Element>> {
    let mut line = String::new();
    let mut next = |r: &mut dyn BufRead| -> Result<String> {
        line.clear();
        let n = r.read_line(&mut line).map_err(io_err(path))?;
        if n == 0 {
            return Err(format_err(path, "unexpected end of header"));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next(r)? != "ply" {
        return Err(format_err(path, "not a PLY file"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    loop {
        let l = next(r)?;
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(format_err(
                        path,
                        format!("unsupported PLY format `{fmt}`; only binary_little_endian is read"),
                    ));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| format_err(path, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                return Err(format_err(path, "list properties are not supported"));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| format_err(path, format!("unknown property type `{ty}`")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| format_err(path, "property before any element"))?;
                el.props.push((name.to_string(), ty));
            }
            _ => return Err(format_err(path, format!("malformed header line `{l}`"))),
        }
    }
    if !format_seen {
        return Err(format_err(path, "header has no format line"));
    }
    Ok(elements)
}

/// Reads raw points from a binary little-endian PLY file.
pub fn read_ply(path: &Path) -> Result<Vec<PlyPoint>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let elements = read_header(path, &mut r)?;
    let mut points = Vec::new();
    let mut found = false;
    for el in &elements {
        let stride = el.stride();
        if el.name != "vertex" {
            let mut skip = (&mut r).take((stride * el.count) as u64);
            let skipped = std::io::copy(&mut skip, &mut std::io::sink()).map_err(io_err(path))?;
            if skipped != (stride * el.count) as u64 {
                return Err(format_err(path, format!("truncated element `{}`", el.name)));
            }
            continue;
        }
        found = true;
        // Byte offset and type of every required property.
        let mut slots = Vec::new();
        for name in required_properties() {
            let mut off = 0;
            let mut hit = None;
            for (n, ty) in &el.props {
                if *n == name {
                    hit = Some((off, *ty));
                    break;
                }
                off += ty.size();
            }
            match hit {
                Some(h) => slots.push(h),
                None => {
                    return Err(IoError::MissingProperty {
                        path: path.to_path_buf(),
                        property: name,
                    })
                }
            }
        }
        if el.count == 0 {
            return Err(format_err(path, "vertex element has no points"));
        }
        let mut buf = vec![0u8; stride];
        points.reserve(el.count);
        for i in 0..el.count {
            r.read_exact(&mut buf)
                .map_err(|_| format_err(path, format!("truncated at point {i} of {}", el.count)))?;
            let v: Vec<f32> = slots.iter().map(|&(off, ty)| ty.decode(&buf[off..])).collect();
            let mut p = PlyPoint::default();
            p.position.copy_from_slice(&v[0..3]);
            p.f_dc.copy_from_slice(&v[3..6]);
            p.f_rest.copy_from_slice(&v[6..51]);
            p.opacity_logit = v[51];
            p.log_scale.copy_from_slice(&v[52..55]);
            p.rotation.copy_from_slice(&v[55..59]);
            points.push(p);
        }
    }
    if !found {
        return Err(format_err(path, "no vertex element"));
    }
    Ok(points)
}

/// Writes points as binary little-endian PLY with float properties in
/// exporter order.
pub fn write_ply(path: &Path, points: &[PlyPoint]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", points.len());
    for name in required_properties() {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes()).map_err(io_err(path))?;
    for p in points {
        let values = p
            .position
            .iter()
            .chain(&p.f_dc)
            .chain(&p.f_rest)
            .chain(std::iter::once(&p.opacity_logit))
            .chain(&p.log_scale)
            .chain(&p.rotation);
        for v in values {
            w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Why a point was dropped during activation.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    NonFinite,
    ZeroRotation,
    NotPsd,
}

/// Applies the training activations: logistic opacity, exponential scales,
/// normalized rotation and `cov = R S S^T R^T`. SH coefficients move from
/// channel-major to `sh[coef * 3 + channel]`.
pub fn activate(p: &PlyPoint, index: usize) -> std::result::Result<Gaussian3D, Rejection> {
    let all = p
        .position
        .iter()
        .chain(&p.f_dc)
        .chain(&p.f_rest)
        .chain(std::iter::once(&p.opacity_logit))
        .chain(&p.log_scale)
        .chain(&p.rotation);
    if !all.clone().all(|v| v.is_finite()) {
        return Err(Rejection::NonFinite);
    }
    let q: Vec<f64> = p.rotation.iter().map(|&v| v as f64).collect();
    let len = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return Err(Rejection::ZeroRotation);
    }
    let (w, x, y, z) = (q[0] / len, q[1] / len, q[2] / len, q[3] / len);
    let rot = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let s: Vec<f64> = p.log_scale.iter().map(|&v| (v as f64).exp()).collect();
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| rot[i][j] * s[j]));
    let idx = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut cov = [0.0f32; 6];
    for (k, &(i, j)) in idx.iter().enumerate() {
        cov[k] = (0..3).map(|c| m[i][c] * m[j][c]).sum::<f64>() as f32;
    }
    let mut sh = [0.0f32; 48];
    for c in 0..3 {
        sh[c] = p.f_dc[c];
        for k in 0..15 {
            sh[(k + 1) * 3 + c] = p.f_rest[c * 15 + k];
        }
    }
    let g = Gaussian3D {
        mean: p.position,
        opacity: (1.0 / (1.0 + (-(p.opacity_logit as f64)).exp())) as f32,
        cov3d: cov,
        sh,
    };
    match g.validate(index) {
        Ok(()) => Ok(g),
        Err(_) if !cov.iter().all(|v| v.is_finite()) => Err(Rejection::NonFinite),
        Err(_) => Err(Rejection::NotPsd),
    }
}

/// Activated scene plus the points that could not be used.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub gaussians: Vec<Gaussian3D>,
    /// `(point index, reason)` for every rejected point.
    pub rejected: Vec<(usize, Rejection)>,
}

/// Loads and activates a trained point cloud. Every point ends up either in
/// `gaussians` or in `rejected`.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let points = read_ply(path)?;
    let mut scene = Scene::default();
    for (i, p) in points.iter().enumerate() {
        match activate(p, i) {
            Ok(g) => scene.gaussians.push(g),
            Err(r) => scene.rejected.push((i, r)),
        }
    }
    Ok(scene)
}

// ---------------------------------------------------------------------------
// Camera

/// Camera description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    /// Row-major world-to-camera matrix.
    pub world_to_camera: [f32; 16],
    pub fx: f32,
    pub fy: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

impl From<&Camera> for CameraFile {
    fn from(c: &Camera) -> Self {
        let mut m = [0.0; 16];
        for (i, row) in c.view.iter().enumerate() {
            m[i * 4..i * 4 + 4].copy_from_slice(row);
        }
        CameraFile {
            world_to_camera: m,
            fx: c.fx,
            fy: c.fy,
            width: c.width,
            height: c.height,
            near: c.near,
            far: c.far,
        }
    }
}

impl CameraFile {
    pub fn to_camera(&self) -> Camera {
        let m = &self.world_to_camera;
        Camera {
            view: std::array::from_fn(|i| std::array::from_fn(|j| m[i * 4 + j])),
            fx: self.fx,
            fy: self.fy,
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
        }
    }
}

pub fn load_camera(path: &Path) -> Result<Camera> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: CameraFile = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let cam = file.to_camera();
    cam.validate().map_err(|source| IoError::Core {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(cam)
}

pub fn save_camera(path: &Path, camera: &Camera) -> Result<()> {
    let text = serde_json::to_string_pretty(&CameraFile::from(camera)).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Images

/// `round(255 * clamp(c, 0, 1))` with halves rounded up.
pub fn quantize(c: f32) -> u8 {
    let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
    (255.0 * c + 0.5).floor() as u8
}

/// Binary P6 encoding of a framebuffer.
pub fn encode_p6(fb: &FrameBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", fb.width, fb.height).into_bytes();
    out.extend(fb.data.iter().map(|&c| quantize(c)));
    out
}

pub fn write_image(fb: &FrameBuffer, path: &Path) -> Result<()> {
    std::fs::write(path, encode_p6(fb)).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// CSV

/// Writes `header` followed by `rows`; the header is written even when there
/// are no rows.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub const TRACE_HEADER: [&str; 6] = ["pass_id", "work_item_id", "texture_id", "kind", "x", "y"];

/// Streams access events to a CSV file. The first write error is kept and
/// returned by [`TraceWriter::finish`]; later events are dropped.
pub struct TraceWriter {
    path: PathBuf,
    w: csv::Writer<BufWriter<File>>,
    events: u64,
    error: Option<csv::Error>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(TRACE_HEADER).map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(TraceWriter {
            path: path.to_path_buf(),
            w,
            events: 0,
            error: None,
        })
    }

    /// Flushes and returns the number of events written.
    pub fn finish(mut self) -> Result<u64> {
        if let Some(source) = self.error.take() {
            return Err(IoError::Csv { path: self.path, source });
        }
        self.w.flush().map_err(io_err(&self.path))?;
        Ok(self.events)
    }
}

impl AccessSink for TraceWriter {
    fn record(&mut self, ev: &AccessEvent) {
        if self.error.is_some() {
            return;
        }
        let kind = match ev.kind {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
        };
        let row = [
            ev.pass_id.to_string(),
            ev.work_item.to_string(),
            ev.texture.0.to_string(),
            kind.to_string(),
            ev.x.to_string(),
            ev.y.to_string(),
        ];
        match self.w.write_record(&row) {
            Ok(()) => self.events += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rotation_unit_scale() {
        let g = activate(&PlyPoint::default(), 0).unwrap();
        assert_eq!(g.cov3d, [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(g.opacity, 0.5);
    }

    #[test]
    fn rotation_is_normalized() {
        let p = PlyPoint {
            rotation: [2.0, 0.0, 0.0, 0.0],
            log_scale: [0.0, 2.0f32.ln(), 0.0],
            ..PlyPoint::default()
        };
        let g = activate(&p, 0).unwrap();
        assert!((g.cov3d[3] - 4.0).abs() < 1e-5);
        assert_eq!(g.cov3d[0], 1.0);
    }

    #[test]
    fn quarter_turn_about_z_swaps_axes() {
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let p = PlyPoint {
            rotation: [h, 0.0, 0.0, h],
            log_scale: [2.0f32.ln(), 0.0, 0.0],
            ..PlyPoint::default()
        };
        let g = activate(&p, 0).unwrap();
        assert!((g.cov3d[0] - 1.0).abs() < 1e-5);
        assert!((g.cov3d[3] - 4.0).abs() < 1e-5);
        assert!(g.cov3d[1].abs() < 1e-5);
    }

    #[test]
    fn sh_reordering() {
        let mut p = PlyPoint::default();
        for (i, v) in p.f_rest.iter_mut().enumerate() {
            *v = i as f32;
        }
        p.f_dc = [100.0, 101.0, 102.0];
        let g = activate(&p, 0).unwrap();
        assert_eq!(&g.sh[..3], &[100.0, 101.0, 102.0]);
        // coefficient 1 of channel 0, 1, 2
        assert_eq!(&g.sh[3..6], &[0.0, 15.0, 30.0]);
        // coefficient 15 of channel 2
        assert_eq!(g.sh[47], 44.0);
    }

    #[test]
    fn rejections() {
        let p = PlyPoint {
            rotation: [0.0; 4],
            ..PlyPoint::default()
        };
        assert_eq!(activate(&p, 0), Err(Rejection::ZeroRotation));
        let p = PlyPoint {
            position: [f32::NAN, 0.0, 0.0],
            ..PlyPoint::default()
        };
        assert_eq!(activate(&p, 0), Err(Rejection::NonFinite));
        let p = PlyPoint {
            log_scale: [200.0, 0.0, 0.0],
            ..PlyPoint::default()
        };
        assert_eq!(activate(&p, 0), Err(Rejection::NonFinite));
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(7.0), 255);
        assert_eq!(quantize(f32::NAN), 0);
    }

    #[test]
    fn p6_black() {
        let fb = FrameBuffer::filled(3, 2, [0.0; 3]);
        let bytes = encode_p6(&fb);
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 18);
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn property_list_order() {
        let names = required_properties();
        assert_eq!(names.len(), 59);
        assert_eq!(names[6], "f_rest_0");
        assert_eq!(names[51], "opacity");
        assert_eq!(names[58], "rot_3");
    }
}
