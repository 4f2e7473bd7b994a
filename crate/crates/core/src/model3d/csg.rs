use std::fmt::Write as _;
use std::path::Path;

use super::{BowSpec, HeightProfile, ModelError};
use crate::bitting::KeySpec;
use crate::geometry::Point2;

/// Maps extrusion coordinates `(u, v, t)` to model `(x = t, y = u, z = v)`.
const KEYWAY_FRAME: &str = "[[0,0,1,{x}],[1,0,0,0],[0,1,0,0],[0,0,0,1]]";

/// OpenSCAD program for the same solid as the mesh route:
///
/// ```text
/// union() {
///   difference() { keyway extruded over the blade; region above h(x) }
///   bow plate
/// }
/// ```
///
/// Numbers are printed with Rust's shortest round-trip formatting, so the
/// output is a pure function of the inputs.
pub fn render_csg_script(
    spec: &KeySpec,
    profile: &HeightProfile,
    bow: &BowSpec,
) -> Result<String, ModelError> {
    bow.validate()?;
    let length = spec.blade_length_mm;
    let top = spec.keyway_top();
    let (u0, u1) = spec
        .keyway
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.x), hi.max(p.x))
        });

    // Cutter in the (x, v) plane, slightly wider than the blade on every side.
    let knots = profile.knots();
    let mut cutter = Vec::with_capacity(knots.len() + 4);
    cutter.push(Point2::new(-1.0, knots[0].1));
    cutter.extend(knots.iter().map(|&(x, h)| Point2::new(x, h)));
    cutter.push(Point2::new(length + 1.0, knots[knots.len() - 1].1));
    cutter.push(Point2::new(length + 1.0, top + 1.0));
    cutter.push(Point2::new(-1.0, top + 1.0));

    let (bx0, _) = bow.x_range();
    let mut s = String::new();
    s.push_str("// keyforge key model, units mm\n");
    s.push_str("union() {\n");
    s.push_str("  difference() {\n");
    push_extrusion(
        &mut s,
        4,
        &KEYWAY_FRAME.replace("{x}", "0"),
        length,
        &spec.keyway,
    );
    let cutter_frame = format!("[[1,0,0,0],[0,0,1,{}],[0,1,0,0],[0,0,0,1]]", num(u0 - 1.0));
    push_extrusion(&mut s, 4, &cutter_frame, u1 - u0 + 2.0, &cutter);
    s.push_str("  }\n");
    push_extrusion(
        &mut s,
        2,
        &KEYWAY_FRAME.replace("{x}", &num(bx0)),
        bow.thickness_mm,
        &bow.placed_outline(spec),
    );
    s.push_str("}\n");
    Ok(s)
}

fn push_extrusion(s: &mut String, indent: usize, frame: &str, height: f64, poly: &[Point2]) {
    let pad = " ".repeat(indent);
    let pts: Vec<String> = poly
        .iter()
        .map(|p| format!("[{},{}]", num(p.x), num(p.y)))
        .collect();
    let _ = writeln!(s, "{pad}multmatrix({frame})");
    let _ = writeln!(s, "{pad}  linear_extrude(height = {})", num(height));
    let _ = writeln!(s, "{pad}    polygon(points = [{}]);", pts.join(","));
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

pub fn emit_csg_script(
    spec: &KeySpec,
    profile: &HeightProfile,
    bow: &BowSpec,
    path: &Path,
) -> Result<(), ModelError> {
    let script = render_csg_script(spec, profile, bow)?;
    std::fs::write(path, script)
        .map_err(|e| ModelError::IoFailure(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_determinism() {
        let spec = KeySpec::default();
        let profile = HeightProfile::new(vec![(0.0, 8.0), (15.0, 5.0), (30.0, 3.0)]).unwrap();
        let bow = BowSpec::default();
        let a = render_csg_script(&spec, &profile, &bow).unwrap();
        let b = render_csg_script(&spec, &profile, &bow).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("union()").count(), 1);
        assert_eq!(a.matches("difference()").count(), 1);
        assert_eq!(a.matches("linear_extrude").count(), 3);
        assert_eq!(a.matches("polygon(").count(), 3);
        assert!(a.contains("[15,5]"));
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("key.scad");
        let spec = KeySpec::default();
        let profile = HeightProfile::constant(30.0, 8.0).unwrap();
        emit_csg_script(&spec, &profile, &BowSpec::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("// keyforge"));
        let bad = dir.path().join("no/such/dir/key.scad");
        assert!(matches!(
            emit_csg_script(&spec, &profile, &BowSpec::default(), &bad),
            Err(ModelError::IoFailure(_))
        ));
    }
}
