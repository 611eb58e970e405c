//! Cloud CSV: header `id,x1,...,xN`, one row per point in id order,
//! coordinates with 17 significant digits.

use std::io::{BufRead, Write};

use super::{DataCloud, Domain, GeometryError};
use crate::fmt_float;

pub fn write_cloud_csv<W: Write>(cloud: &DataCloud, mut out: W) -> std::io::Result<()> {
    let mut header = String::from("id");
    for k in 1..=cloud.dim() {
        header.push_str(&format!(",x{k}"));
    }
    writeln!(out, "{header}")?;
    for (id, p) in cloud.points().enumerate() {
        write!(out, "{id}")?;
        for v in p {
            write!(out, ",{}", fmt_float(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Read a cloud written by [`write_cloud_csv`]. Rows must carry ids `0..n`
/// in order and lie strictly inside `domain`.
pub fn read_cloud_csv<R: BufRead>(input: R, domain: Domain) -> Result<DataCloud, GeometryError> {
    let dim = domain.dim();
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(GeometryError::Csv {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=dim).map(|k| format!("x{k}")))
        .collect();
    let got: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if got != expected {
        return Err(GeometryError::Csv {
            line: 1,
            message: format!(
                "expected header '{}', got '{}'",
                expected.join(","),
                header.trim()
            ),
        });
    }
    let mut coords = Vec::new();
    let mut next_id = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(GeometryError::Csv {
                line: lineno,
                message: format!("expected {} fields, got {}", dim + 1, fields.len()),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| GeometryError::Csv {
            line: lineno,
            message: format!("bad id '{}'", fields[0]),
        })?;
        if id != next_id {
            return Err(GeometryError::Csv {
                line: lineno,
                message: format!("expected id {next_id}, got {id}"),
            });
        }
        next_id += 1;
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| GeometryError::Csv {
                line: lineno,
                message: format!("bad coordinate '{f}'"),
            })?;
            coords.push(v);
        }
    }
    DataCloud::from_coords(domain, coords, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_cloud, Density};
    use proptest::prelude::*;

    #[test]
    fn header_and_precision() {
        let interval = Domain::unit_box(1);
        let cloud = DataCloud::from_points(interval, &[vec![0.1], vec![2.0 / 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_cloud_csv(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,x1");
        assert_eq!(lines[1], "0,1.0000000000000001e-1");
        assert_eq!(lines[2], "1,6.6666666666666663e-1");
    }

    #[test]
    fn rejects_bad_files() {
        let square = Domain::unit_box(2);
        assert!(read_cloud_csv("id,x1\n0,0.5\n".as_bytes(), square.clone()).is_err());
        assert!(read_cloud_csv("id,x1,x2\n1,0.5,0.5\n".as_bytes(), square.clone()).is_err());
        assert!(read_cloud_csv("id,x1,x2\n0,0.5\n".as_bytes(), square.clone()).is_err());
        assert!(matches!(
            read_cloud_csv("id,x1,x2\n0,0.5,1.5\n".as_bytes(), square),
            Err(GeometryError::PointOutside { index: 0, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_is_bit_exact(n in 1usize..200, seed in any::<u64>(), dim in 1usize..4) {
            let domain = Domain::unit_box(dim);
            let cloud = sample_cloud(&domain, &Density::uniform(&domain), n, seed).unwrap();
            let mut buf = Vec::new();
            write_cloud_csv(&cloud, &mut buf).unwrap();
            let back = read_cloud_csv(buf.as_slice(), domain).unwrap();
            prop_assert_eq!(back.coords(), cloud.coords());
        }
    }
}
