//! Artifact file formats.
//!
//! - Waveform sets: CSV (`antenna,sample_index,re,im`) plus a JSON metadata
//!   sidecar.
//! - Point scenes: JSON. Raster scenes: 8-bit binary PGM plus a JSON
//!   georeferencing sidecar (origin, spacing, signal threshold).
//! - Receiver captures: CSV (`rx,sample,re,im`).
//! - Range-compressed cubes: planar little-endian `f32` pairs plus a JSON
//!   header.
//! - Images: dB-scaled PGM magnitude plus a CSV of the complex values.
//!
//! Numeric CSV fields use Rust's shortest round-trip float formatting, so
//! write-read cycles reproduce values exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CellLabel, PointScatterer, RasterScene};
use crate::encoder::{SetMetadata, WaveformSet};
use crate::error::{Error, Result};
use crate::receivers::{ImageGrid, RadarImage, RangeCompressedCube};
use crate::sequence::ComplexSequence;

// ---------------------------------------------------------------------------
// Waveform sets
// ---------------------------------------------------------------------------

/// Writes the sample CSV: header `antenna,sample_index,re,im`.
pub fn write_waveforms_csv(set: &WaveformSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["antenna", "sample_index", "re", "im"])?;
    for (a, wave) in set.waveforms().iter().enumerate() {
        for (i, s) in wave.samples().iter().enumerate() {
            w.write_record(&[a.to_string(), i.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the JSON metadata sidecar.
pub fn write_set_metadata(meta: &SetMetadata, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads a waveform set from its CSV and sidecar.
pub fn read_waveform_set(csv_path: &Path, meta_path: &Path) -> Result<WaveformSet> {
    let meta: SetMetadata = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let mut per_antenna: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); meta.n];
    for record in reader.records() {
        let r = record?;
        let antenna: usize = parse_field(csv_path, &r, 0)?;
        let index: usize = parse_field(csv_path, &r, 1)?;
        let re: f64 = parse_field(csv_path, &r, 2)?;
        let im: f64 = parse_field(csv_path, &r, 3)?;
        if antenna >= meta.n {
            return Err(Error::format(
                csv_path.display().to_string(),
                format!("antenna {antenna} outside 0..{}", meta.n),
            ));
        }
        per_antenna[antenna].push((index, Complex64::new(re, im)));
    }
    let mut waveforms = Vec::with_capacity(meta.n);
    for (a, mut samples) in per_antenna.into_iter().enumerate() {
        samples.sort_by_key(|(i, _)| *i);
        if samples.iter().enumerate().any(|(want, (got, _))| want != *got) {
            return Err(Error::format(
                csv_path.display().to_string(),
                format!("antenna {a}: sample indices not contiguous"),
            ));
        }
        waveforms.push(ComplexSequence::new(samples.into_iter().map(|(_, s)| s).collect())?);
    }
    WaveformSet::new(waveforms, meta)
}

fn parse_field<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, idx: usize) -> Result<T> {
    record
        .get(idx)
        .ok_or_else(|| Error::format(path.display().to_string(), format!("missing column {idx}")))?
        .parse::<T>()
        .map_err(|_| {
            Error::format(
                path.display().to_string(),
                format!("column {idx}: cannot parse {:?}", record.get(idx)),
            )
        })
}

// ---------------------------------------------------------------------------
// Receiver captures
// ---------------------------------------------------------------------------

/// Writes receiver sequences as CSV: `rx,sample,re,im`.
pub fn write_capture_csv(sequences: &[ComplexSequence], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rx", "sample", "re", "im"])?;
    for (m, seq) in sequences.iter().enumerate() {
        for (i, s) in seq.samples().iter().enumerate() {
            w.write_record(&[m.to_string(), i.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_capture_csv(path: &Path) -> Result<Vec<ComplexSequence>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, usize, Complex64)> = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push((
            parse_field(path, &r, 0)?,
            parse_field(path, &r, 1)?,
            Complex64::new(parse_field(path, &r, 2)?, parse_field(path, &r, 3)?),
        ));
    }
    let m = rows.iter().map(|(rx, _, _)| rx + 1).max().unwrap_or(0);
    let mut per_rx: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); m];
    for (rx, i, v) in rows {
        per_rx[rx].push((i, v));
    }
    per_rx
        .into_iter()
        .map(|mut samples| {
            samples.sort_by_key(|(i, _)| *i);
            ComplexSequence::new(samples.into_iter().map(|(_, s)| s).collect())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// Serializable point-scene file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSceneFile {
    pub targets: Vec<PointScatterer>,
}

pub fn write_point_scene(targets: &[PointScatterer], path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&PointSceneFile { targets: targets.to_vec() })?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_point_scene(path: &Path) -> Result<Vec<PointScatterer>> {
    let f: PointSceneFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(f.targets)
}

/// Georeferencing sidecar for a PGM raster mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RasterSidecar {
    /// World coordinates of pixel (0, 0)'s center (m).
    pub origin: [f64; 2],
    /// Cell pitch (m).
    pub spacing: [f64; 2],
    /// Pixels at or above this value are signal region.
    pub signal_threshold: u8,
    /// Amplitude assigned to pixel value 255.
    #[serde(default = "default_amplitude_scale")]
    pub amplitude_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speckle_seed: Option<u64>,
}

fn default_amplitude_scale() -> f64 {
    1.0
}

/// Writes a raster scene as binary PGM plus sidecar. Pixel encoding: noise
/// cells 0, excluded cells 1, signal cells `max(threshold,
/// round(reflectivity / amplitude_scale * 255))`.
pub fn write_raster_scene(scene: &RasterScene, sidecar: &RasterSidecar, pgm_path: &Path, sidecar_path: &Path) -> Result<()> {
    let nx = scene.nx();
    let ny = scene.ny();
    let mut pixels = vec![0u8; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let v = match scene.labels[(ix, iy)] {
                CellLabel::Noise => 0u8,
                CellLabel::Excluded => 1u8,
                CellLabel::Signal => {
                    let a = scene.reflectivity[(ix, iy)] / sidecar.amplitude_scale;
                    ((a * 255.0).round() as i64).clamp(sidecar.signal_threshold as i64, 255) as u8
                }
            };
            pixels[iy * nx + ix] = v;
        }
    }
    write_pgm(pgm_path, nx, ny, &pixels)?;
    fs::write(sidecar_path, serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

/// Reads a raster scene back from PGM + sidecar.
pub fn read_raster_scene(pgm_path: &Path, sidecar_path: &Path) -> Result<RasterScene> {
    let sidecar: RasterSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
    let (nx, ny, pixels) = read_pgm(pgm_path)?;
    let mut reflectivity = Array2::zeros((nx, ny));
    let mut labels = Array2::from_elem((nx, ny), CellLabel::Noise);
    for iy in 0..ny {
        for ix in 0..nx {
            let v = pixels[iy * nx + ix];
            if v >= sidecar.signal_threshold {
                reflectivity[(ix, iy)] = v as f64 / 255.0 * sidecar.amplitude_scale;
                labels[(ix, iy)] = CellLabel::Signal;
            } else if v > 0 {
                labels[(ix, iy)] = CellLabel::Excluded;
            }
        }
    }
    Ok(RasterScene {
        origin: sidecar.origin,
        spacing: sidecar.spacing,
        reflectivity,
        labels,
        speckle_seed: sidecar.speckle_seed,
    })
}

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    f.flush()?;
    Ok(())
}

fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header_fields: Vec<String> = Vec::new();
    // Header: magic, width, height, maxval; comments start with '#'.
    while header_fields.len() < 4 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format(path.display().to_string(), "truncated PGM header"));
        }
        for tok in line.split_whitespace() {
            if tok.starts_with('#') {
                break;
            }
            header_fields.push(tok.to_string());
        }
    }
    if header_fields[0] != "P5" {
        return Err(Error::format(path.display().to_string(), "not a binary PGM (P5)"));
    }
    let width: usize = header_fields[1]
        .parse()
        .map_err(|_| Error::format(path.display().to_string(), "bad width"))?;
    let height: usize = header_fields[2]
        .parse()
        .map_err(|_| Error::format(path.display().to_string(), "bad height"))?;
    if header_fields[3] != "255" {
        return Err(Error::format(path.display().to_string(), "only maxval 255 supported"));
    }
    let mut pixels = vec![0u8; width * height];
    reader.read_exact(&mut pixels)?;
    Ok((width, height, pixels))
}

// ---------------------------------------------------------------------------
// Range-compressed cubes
// ---------------------------------------------------------------------------

/// JSON header describing the binary cube file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeHeader {
    pub n: usize,
    pub m: usize,
    pub bins: usize,
    pub lag_start: i64,
    pub oversample: usize,
    pub t_s: f64,
}

/// Writes the cube as planar little-endian `f32` re/im pairs in `(n, m,
/// bin)` order, with a JSON header alongside.
pub fn write_cube(cube: &RangeCompressedCube, bin_path: &Path, header_path: &Path) -> Result<()> {
    let header = CubeHeader {
        n: cube.n(),
        m: cube.m(),
        bins: cube.bins(),
        lag_start: cube.lag_start,
        oversample: cube.oversample,
        t_s: cube.t_s,
    };
    fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    let mut f = BufWriter::new(fs::File::create(bin_path)?);
    for v in cube.data.iter() {
        f.write_f32::<LittleEndian>(v.re as f32)?;
        f.write_f32::<LittleEndian>(v.im as f32)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_cube(bin_path: &Path, header_path: &Path) -> Result<RangeCompressedCube> {
    let header: CubeHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    let mut f = BufReader::new(fs::File::open(bin_path)?);
    let count = header.n * header.m * header.bins;
    let mut data = Array3::zeros((header.n, header.m, header.bins));
    for v in data.iter_mut() {
        let re = f.read_f32::<LittleEndian>()? as f64;
        let im = f.read_f32::<LittleEndian>()? as f64;
        *v = Complex64::new(re, im);
    }
    let mut probe = [0u8; 1];
    if f.read(&mut probe)? != 0 {
        return Err(Error::format(
            bin_path.display().to_string(),
            format!("file longer than the {count} samples the header declares"),
        ));
    }
    Ok(RangeCompressedCube {
        data,
        lag_start: header.lag_start,
        oversample: header.oversample,
        t_s: header.t_s,
    })
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Writes the image magnitude as a dB-scaled PGM: 255 at the peak,
/// `floor_db` and below at 0. Row 0 is the smallest y index.
pub fn write_image_pgm(img: &RadarImage, floor_db: f64, path: &Path) -> Result<()> {
    if floor_db >= 0.0 {
        return Err(Error::parameter("dB floor must be negative"));
    }
    let mag = img.magnitude();
    let peak = mag.iter().cloned().fold(0.0f64, f64::max);
    let nx = img.grid.nx;
    let ny = img.grid.ny;
    let mut pixels = vec![0u8; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let db = if peak > 0.0 && mag[(ix, iy)] > 0.0 {
                20.0 * (mag[(ix, iy)] / peak).log10()
            } else {
                floor_db
            };
            let t = ((db - floor_db) / -floor_db).clamp(0.0, 1.0);
            pixels[iy * nx + ix] = (t * 255.0).round() as u8;
        }
    }
    write_pgm(path, nx, ny, &pixels)
}

/// Writes the complex image values as CSV: `ix,iy,x,y,re,im`.
pub fn write_image_csv(img: &RadarImage, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ix", "iy", "x", "y", "re", "im"])?;
    for ix in 0..img.grid.nx {
        for iy in 0..img.grid.ny {
            let p = img.grid.cell_center(ix, iy);
            let v = img.values[(ix, iy)];
            w.write_record(&[
                ix.to_string(),
                iy.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an image back from its CSV, given the grid it was computed on.
pub fn read_image_csv(path: &Path, grid: &ImageGrid) -> Result<RadarImage> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut values = Array2::zeros((grid.nx, grid.ny));
    let mut filled = Array2::from_elem((grid.nx, grid.ny), false);
    for record in reader.records() {
        let r = record?;
        let ix: usize = parse_field(path, &r, 0)?;
        let iy: usize = parse_field(path, &r, 1)?;
        if ix >= grid.nx || iy >= grid.ny {
            return Err(Error::format(
                path.display().to_string(),
                format!("cell ({ix},{iy}) outside {}x{}", grid.nx, grid.ny),
            ));
        }
        values[(ix, iy)] = Complex64::new(parse_field(path, &r, 4)?, parse_field(path, &r, 5)?);
        filled[(ix, iy)] = true;
    }
    if filled.iter().any(|&f| !f) {
        return Err(Error::format(path.display().to_string(), "image CSV does not fill the grid"));
    }
    Ok(RadarImage { values, grid: grid.clone(), clipped: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{generate_cosmic_set_random, Constellation, CosmicConfig};

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("cosmic-io-{name}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn waveform_set_roundtrips_exactly() {
        let d = tmpdir("set");
        let cfg = CosmicConfig::new(64, 2, 16, 4).with_seed(3);
        let (set, _) = generate_cosmic_set_random(&cfg, Constellation::Qam16, 4).unwrap();
        let csv_path = d.join("waveforms.csv");
        let meta_path = d.join("waveforms.meta.json");
        write_waveforms_csv(&set, &csv_path).unwrap();
        write_set_metadata(set.meta(), &meta_path).unwrap();
        let back = read_waveform_set(&csv_path, &meta_path).unwrap();
        assert_eq!(back.meta(), set.meta());
        for (a, b) in set.waveforms().iter().zip(back.waveforms().iter()) {
            assert_eq!(a.samples(), b.samples());
        }
    }

    #[test]
    fn capture_roundtrips_exactly() {
        let d = tmpdir("capture");
        let seqs = vec![
            ComplexSequence::new(vec![Complex64::new(0.1, -0.2), Complex64::new(1e-17, 3.5)]).unwrap(),
            ComplexSequence::new(vec![Complex64::new(-4.0, 0.0), Complex64::new(0.25, 0.125)]).unwrap(),
        ];
        let p = d.join("raw.csv");
        write_capture_csv(&seqs, &p).unwrap();
        let back = read_capture_csv(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in seqs.iter().zip(back.iter()) {
            assert_eq!(a.samples(), b.samples());
        }
    }

    #[test]
    fn point_scene_roundtrips() {
        let d = tmpdir("points");
        let pts =
            vec![PointScatterer::new(1.0, 2.0, 0.5), PointScatterer { position: [0.0, 8.0], reflectivity: [0.1, -0.3] }];
        let p = d.join("scene.json");
        write_point_scene(&pts, &p).unwrap();
        let back = read_point_scene(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].reflectivity, [0.1, -0.3]);
    }

    #[test]
    fn raster_scene_roundtrips_labels() {
        let d = tmpdir("raster");
        let scene = RasterScene::disk([-5.0, 2.0], [0.5, 0.5], 20, 24, [0.0, 7.0], 2.0, 1.0, 2, Some(9));
        let sidecar = RasterSidecar {
            origin: scene.origin,
            spacing: scene.spacing,
            signal_threshold: 128,
            amplitude_scale: 1.0,
            speckle_seed: Some(9),
        };
        let pgm = d.join("mask.pgm");
        let sc = d.join("mask.json");
        write_raster_scene(&scene, &sidecar, &pgm, &sc).unwrap();
        let back = read_raster_scene(&pgm, &sc).unwrap();
        assert_eq!(back.nx(), 20);
        assert_eq!(back.ny(), 24);
        assert_eq!(back.labels, scene.labels);
        assert_eq!(back.speckle_seed, Some(9));
        for (a, b) in scene.reflectivity.iter().zip(back.reflectivity.iter()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn cube_roundtrips_at_f32_precision() {
        let d = tmpdir("cube");
        let data = Array3::from_shape_fn((2, 3, 5), |(n, m, b)| {
            Complex64::new(n as f64 + 0.25 * b as f64, m as f64 - 0.5)
        });
        let cube = RangeCompressedCube { data, lag_start: -4, oversample: 4, t_s: 5e-9 };
        let bin = d.join("cube.bin");
        let hdr = d.join("cube.json");
        write_cube(&cube, &bin, &hdr).unwrap();
        let back = read_cube(&bin, &hdr).unwrap();
        assert_eq!(back.lag_start, -4);
        assert_eq!(back.oversample, 4);
        for (a, b) in cube.data.iter().zip(back.data.iter()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn image_csv_roundtrips() {
        let d = tmpdir("image");
        let grid = ImageGrid { origin: [-1.0, 4.0], spacing: [0.5, 0.5], nx: 4, ny: 3 };
        let values = Array2::from_shape_fn((4, 3), |(x, y)| Complex64::new(x as f64, -(y as f64)));
        let img = RadarImage { values, grid: grid.clone(), clipped: 0 };
        let p = d.join("image.csv");
        write_image_csv(&img, &p).unwrap();
        let back = read_image_csv(&p, &grid).unwrap();
        assert_eq!(back.values, img.values);
    }

    #[test]
    fn image_pgm_scales_peak_to_white() {
        let d = tmpdir("pgm");
        let grid = ImageGrid { origin: [0.0, 0.0], spacing: [1.0, 1.0], nx: 2, ny: 2 };
        let mut values = Array2::zeros((2, 2));
        values[(0, 0)] = Complex64::new(1.0, 0.0);
        values[(1, 1)] = Complex64::new(0.001, 0.0); // -60 dB
        let img = RadarImage { values, grid, clipped: 0 };
        let p = d.join("img.pgm");
        write_image_pgm(&img, -60.0, &p).unwrap();
        let (w, h, px) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(px[0], 255);
        assert_eq!(px[3], 0);
    }
}
