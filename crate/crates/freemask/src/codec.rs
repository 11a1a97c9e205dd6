//! File codecs: 8-bit grayscale PNG for label maps, NPY v1.0 for float arrays.
//!
//! Loss maps are `<f4` C-order arrays of shape (H, W); probability maps are
//! shape (K, H, W). Writing is byte-deterministic: the same in-memory map
//! always produces the same file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::config::CurationConfig;
use crate::error::{Error, Result};
use crate::maps::{LabelMap, LossMap, ProbMap};

pub fn read_label_map(path: &Path, config: &CurationConfig) -> Result<LabelMap> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Validation(format!(
                "{}: expected 8-bit single-channel PNG, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (width, height) = gray.dimensions();
    LabelMap::new(width, height, gray.into_raw(), config)
}

pub fn write_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let writer = BufWriter::new(file);
    PngEncoder::new(writer)
        .write_image(
            map.data(),
            map.width(),
            map.height(),
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::Image {
            path: path.into(),
            source: e,
        })
}

pub fn read_loss_map(path: &Path, expected_dims: (u32, u32)) -> Result<LossMap> {
    let (shape, data) = read_npy_f32(path)?;
    if shape.len() != 2 {
        return Err(Error::Npy {
            path: path.into(),
            msg: format!("expected 2-d array, got shape {shape:?}"),
        });
    }
    let (height, width) = (shape[0] as u32, shape[1] as u32);
    let (exp_w, exp_h) = expected_dims;
    if width != exp_w || height != exp_h {
        return Err(Error::Shape {
            expected_width: exp_w,
            expected_height: exp_h,
            width,
            height,
        });
    }
    LossMap::new(width, height, data)
}

pub fn write_loss_map(map: &LossMap, path: &Path) -> Result<()> {
    write_npy_f32(
        path,
        &[map.height() as usize, map.width() as usize],
        map.data(),
    )
}

pub fn read_prob_map(path: &Path, expected_dims: (u32, u32), num_classes: usize) -> Result<ProbMap> {
    let (shape, data) = read_npy_f32(path)?;
    if shape.len() != 3 {
        return Err(Error::Npy {
            path: path.into(),
            msg: format!("expected 3-d array, got shape {shape:?}"),
        });
    }
    let (k, height, width) = (shape[0], shape[1] as u32, shape[2] as u32);
    if k != num_classes {
        return Err(Error::Config(format!(
            "{}: probability map has {} classes, expected {}",
            path.display(),
            k,
            num_classes
        )));
    }
    let (exp_w, exp_h) = expected_dims;
    if width != exp_w || height != exp_h {
        return Err(Error::Shape {
            expected_width: exp_w,
            expected_height: exp_h,
            width,
            height,
        });
    }
    ProbMap::new(width, height, num_classes, data)
}

pub fn write_prob_map(map: &ProbMap, path: &Path) -> Result<()> {
    write_npy_f32(
        path,
        &[
            map.num_classes(),
            map.height() as usize,
            map.width() as usize,
        ],
        map.data(),
    )
}

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Reads a little-endian float32 C-order array; supports format versions 1 and 2.
pub fn read_npy_f32(path: &Path) -> Result<(Vec<usize>, Vec<f32>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let npy_err = |msg: String| Error::Npy {
        path: path.into(),
        msg,
    };

    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|e| Error::io(path, e))?;
    if &magic[..6] != NPY_MAGIC {
        return Err(npy_err("bad magic".into()));
    }
    let major = magic[6];
    let header_len = match major {
        1 => {
            let mut b = [0u8; 2];
            reader.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
            u16::from_le_bytes(b) as usize
        }
        2 => {
            let mut b = [0u8; 4];
            reader.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(npy_err(format!("unsupported format version {v}"))),
    };
    let mut header = vec![0u8; header_len];
    reader
        .read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| npy_err("header is not valid UTF-8".into()))?;

    let descr = dict_value(header, "descr").ok_or_else(|| npy_err("missing 'descr'".into()))?;
    if descr != "'<f4'" {
        return Err(npy_err(format!(
            "unsupported dtype {descr}, expected '<f4'"
        )));
    }
    let order =
        dict_value(header, "fortran_order").ok_or_else(|| npy_err("missing 'fortran_order'".into()))?;
    if order != "False" {
        return Err(npy_err("Fortran order is not supported".into()));
    }
    let shape_str =
        dict_value(header, "shape").ok_or_else(|| npy_err("missing 'shape'".into()))?;
    let shape = parse_shape(&shape_str)
        .ok_or_else(|| npy_err(format!("unparseable shape {shape_str}")))?;

    let count: usize = shape.iter().product();
    let mut payload = vec![0u8; count * 4];
    reader
        .read_exact(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(npy_err("trailing bytes after array payload".into()));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((shape, data))
}

/// Writes a version 1.0 file, header padded to a 64-byte boundary.
pub fn write_npy_f32(path: &Path, shape: &[usize], data: &[f32]) -> Result<()> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let shape_str = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '<f4', 'fortran_order': False, 'shape': {shape_str}, }}"
    );
    let unpadded = 10 + header.len() + 1; // magic+version+len field, plus final newline
    let padding = (64 - unpadded % 64) % 64;
    header.extend(std::iter::repeat_n(' ', padding));
    header.push('\n');

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    put(&mut writer, NPY_MAGIC)?;
    put(&mut writer, &[1, 0])?;
    put(&mut writer, &(header.len() as u16).to_le_bytes())?;
    put(&mut writer, header.as_bytes())?;
    for v in data {
        put(&mut writer, &v.to_le_bytes())?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Pulls the raw value string for `key` out of a python-literal header dict.
fn dict_value(header: &str, key: &str) -> Option<String> {
    let needle = format!("'{key}':");
    let start = header.find(&needle)? + needle.len();
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}'])?
    };
    Some(rest[..end].trim().to_string())
}

fn parse_shape(s: &str) -> Option<Vec<usize>> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().ok())
        .collect()
}
