use std::path::PathBuf;

use rfs_swarm::{build_case, linspace, surface_grid, CostKind, ScenarioOverrides};

use crate::output::{num, write_atomic, Table};
use crate::{svg, CliError};

#[derive(Debug, Clone)]
pub struct SurfaceArgs {
    pub kind: CostKind,
    pub case: u32,
    pub probe: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub out: PathBuf,
}

pub fn file_stem(kind: CostKind, case: u32) -> String {
    format!("surface_{}_case{case}", kind.short_name())
}

pub fn run(args: &SurfaceArgs) -> Result<(), CliError> {
    if args.nx == 0 || args.ny == 0 {
        return Err(CliError::Usage("grid needs at least one cell per axis".into()));
    }
    let scenario = build_case(args.case, &ScenarioOverrides::default()).map_err(|e| CliError::Usage(e.to_string()))?;
    let f = &scenario.initial_mixture;
    let g = &scenario.target_mixture;
    if args.probe >= f.len() {
        return Err(CliError::Usage(format!(
            "probe {} out of range for {} densities",
            args.probe,
            f.len()
        )));
    }
    let xs = linspace(args.x_range.0, args.x_range.1, args.nx);
    let ys = linspace(args.y_range.0, args.y_range.1, args.ny);
    let values = surface_grid(args.kind, f, g, args.probe, &xs, &ys)?;

    let mut table = Table::new(&[])?;
    for r in 0..values.nrows() {
        table.row(values.row(r).iter().map(|&v| num(v)))?;
    }
    let stem = file_stem(args.kind, args.case);
    let csv_path = args.out.join(format!("{stem}.csv"));
    let svg_path = args.out.join(format!("{stem}.svg"));
    write_atomic(&csv_path, &table.into_bytes())
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", csv_path.display())))?;

    let others: Vec<(f64, f64)> = f
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != args.probe)
        .map(|(_, c)| (c.mean()[0], c.mean()[1]))
        .collect();
    let title = format!("{} surface, case {}, density {} swept", args.kind, args.case, args.probe + 1);
    let doc = svg::heatmap(&values, &xs, &ys, g, &others, &title);
    write_atomic(&svg_path, doc.as_bytes())
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", svg_path.display())))?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}
