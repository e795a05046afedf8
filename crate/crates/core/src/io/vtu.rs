use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::StateFields;
use crate::mesh::SimplicialMesh;

const VTK_TETRA: u8 = 10;

/// Named per-cell arrays written next to the solution.
pub type CellData<'a> = [(&'a str, &'a [f64])];

/// Serialise a mesh with optional nodal fields `u, v, w` and cell data as an
/// ASCII VTK unstructured grid. The refinement tag and level of every cell are
/// always included so that a checkpoint can be refined further.
pub fn vtu_string(mesh: &SimplicialMesh, state: Option<&StateFields>, cell_data: &CellData<'_>) -> Result<String> {
    if let Some(s) = state {
        s.check_on(mesh)?;
    }
    for (name, data) in cell_data {
        if data.len() != mesh.num_cells() {
            return Err(Error::InvalidArgument(format!(
                "cell array `{name}` has {} entries for {} cells",
                data.len(),
                mesh.num_cells()
            )));
        }
    }
    let np = mesh.num_vertices();
    let nc = mesh.num_cells();
    let mut s = String::with_capacity(64 * (np + nc));
    s.push_str("<?xml version=\"1.0\"?>\n");
    s.push_str("<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">\n");
    s.push_str("  <UnstructuredGrid>\n");
    let _ = writeln!(s, "    <Piece NumberOfPoints=\"{np}\" NumberOfCells=\"{nc}\">");

    if let Some(st) = state {
        s.push_str("      <PointData Scalars=\"u\">\n");
        for (name, f) in [("u", &st.u), ("v", &st.v), ("w", &st.w)] {
            float_array(&mut s, name, 1, f);
        }
        s.push_str("      </PointData>\n");
    }

    s.push_str("      <CellData>\n");
    let tags: Vec<String> = (0..nc).map(|c| mesh.cell(c).tag.to_string()).collect();
    let levels: Vec<String> = (0..nc).map(|c| mesh.cell(c).level.to_string()).collect();
    text_array(&mut s, "tag", "UInt8", 1, &tags);
    text_array(&mut s, "level", "UInt32", 1, &levels);
    for (name, data) in cell_data {
        float_array(&mut s, name, 1, data);
    }
    s.push_str("      </CellData>\n");

    s.push_str("      <Points>\n");
    let coords: Vec<f64> = mesh.vertices().iter().flatten().copied().collect();
    float_array(&mut s, "Points", 3, &coords);
    s.push_str("      </Points>\n");

    s.push_str("      <Cells>\n");
    let conn: Vec<String> = (0..nc).flat_map(|c| mesh.cell_vertices(c)).map(|v| v.to_string()).collect();
    text_array(&mut s, "connectivity", "Int64", 1, &conn);
    let offsets: Vec<String> = (1..=nc).map(|c| (4 * c).to_string()).collect();
    text_array(&mut s, "offsets", "Int64", 1, &offsets);
    let types = vec![VTK_TETRA.to_string(); nc];
    text_array(&mut s, "types", "UInt8", 1, &types);
    s.push_str("      </Cells>\n");

    s.push_str("    </Piece>\n  </UnstructuredGrid>\n</VTKFile>\n");
    Ok(s)
}

fn float_array(s: &mut String, name: &str, comps: usize, data: &[f64]) {
    let items: Vec<String> = data.iter().map(|x| format!("{x:?}")).collect();
    text_array(s, name, "Float64", comps, &items);
}

fn text_array(s: &mut String, name: &str, ty: &str, comps: usize, items: &[String]) {
    let _ = writeln!(
        s,
        "        <DataArray type=\"{ty}\" Name=\"{name}\" NumberOfComponents=\"{comps}\" format=\"ascii\">"
    );
    for chunk in items.chunks(6 * comps.max(1)) {
        s.push_str("          ");
        s.push_str(&chunk.join(" "));
        s.push('\n');
    }
    s.push_str("        </DataArray>\n");
}

pub fn write_vtu(path: impl AsRef<Path>, mesh: &SimplicialMesh, state: Option<&StateFields>, cell_data: &CellData<'_>) -> Result<()> {
    let path = path.as_ref();
    let text = vtu_string(mesh, state, cell_data)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Contents of a VTU file written by [`write_vtu`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtuData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 4]>,
    pub point_data: BTreeMap<String, Vec<f64>>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
}

/// Minimal reader for the ASCII tetrahedral files produced here.
pub fn parse_vtu(text: &str) -> Result<VtuData> {
    let perr = |m: String| Error::Parse(m);
    let mut out = VtuData::default();
    let mut section = "";
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        rest = &rest[open..];
        let close = rest.find('>').ok_or_else(|| perr("unterminated tag".into()))?;
        let tag = &rest[1..close];
        rest = &rest[close + 1..];
        let name = tag.split_whitespace().next().unwrap_or("");
        match name {
            "PointData" | "CellData" | "Points" | "Cells" => section = name,
            "/PointData" | "/CellData" | "/Points" | "/Cells" => section = "",
            "DataArray" => {
                let end = rest.find("</DataArray>").ok_or_else(|| perr("unterminated DataArray".into()))?;
                let body = &rest[..end];
                rest = &rest[end..];
                let array_name = attribute(tag, "Name").ok_or_else(|| perr("DataArray without Name".into()))?;
                if attribute(tag, "format").is_some_and(|f| f != "ascii") {
                    return Err(perr(format!("array `{array_name}` is not ascii")));
                }
                let values = body
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(format!("bad number `{t}` in `{array_name}`"))))
                    .collect::<Result<Vec<f64>>>()?;
                match (section, array_name) {
                    ("Points", _) => {
                        if values.len() % 3 != 0 {
                            return Err(perr("point coordinates are not triples".into()));
                        }
                        out.points = values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                    }
                    ("Cells", "connectivity") => {
                        if values.len() % 4 != 0 {
                            return Err(perr("connectivity is not made of tetrahedra".into()));
                        }
                        out.cells = values.chunks(4).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize, c[3] as usize]).collect();
                    }
                    ("Cells", "types") => {
                        if values.iter().any(|&t| t != VTK_TETRA as f64) {
                            return Err(perr("only tetrahedral cells are supported".into()));
                        }
                    }
                    ("Cells", _) => {}
                    ("PointData", n) => {
                        out.point_data.insert(n.to_string(), values);
                    }
                    ("CellData", n) => {
                        out.cell_data.insert(n.to_string(), values);
                    }
                    _ => return Err(perr(format!("DataArray `{array_name}` outside a known section"))),
                }
            }
            _ => {}
        }
    }
    if out.points.is_empty() {
        return Err(perr("no points found".into()));
    }
    if out.cells.iter().flatten().any(|&v| v >= out.points.len()) {
        return Err(perr("connectivity references a missing point".into()));
    }
    Ok(out)
}

fn attribute<'a>(tag: &'a str, key: &str) -> Option<&'a str> {
    let pat = format!("{key}=\"");
    let start = tag.find(&pat)? + pat.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

pub fn read_vtu(path: impl AsRef<Path>) -> Result<VtuData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vtu(&text)
}
