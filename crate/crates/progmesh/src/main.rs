use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use progmesh::config::{load_config, ModeName, PolicyName};
use progmesh::geometry::{channel_grid, l_channel, open_box, save_geometry, straight_channel};
use progmesh::runner::{compare, run, RunOptions};
use progmesh::topology::{describe, load_topology};
use progmesh::Error;

#[derive(Parser)]
#[command(name = "progmesh", version, about = "Progressive-mesh lattice Boltzmann runs and comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeName>,
        #[arg(long)]
        devices: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyName>,
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the static and progressive variants side by side.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write a fixture geometry.
    GenGeometry {
        #[arg(value_enum)]
        kind: Fixture,
        #[arg(long, num_args = 3, value_names = ["NX", "NY", "NZ"], required = true)]
        dims: Vec<usize>,
        /// Duct width in cells.
        #[arg(long, default_value_t = 8)]
        width: usize,
        /// Tile extent (l-channel) or duct spacing (channel-grid).
        #[arg(long, default_value_t = 32)]
        tile: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Validate a topology file and print its reachability classes.
    CheckTopology { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    OpenBox,
    StraightChannel,
    LChannel,
    ChannelGrid,
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run {
            config,
            mode,
            devices,
            policy,
            topology,
            output,
            workers,
        } => {
            let opts = RunOptions {
                mode,
                devices,
                policy,
                topology,
                output,
                workers,
            };
            let cfg = opts.apply(&load_config(&config)?)?;
            let r = run(&cfg)?;
            println!(
                "{} iterations, {} tiles, peak {} bytes, {:.3} MLUPS ({:.3} bbox); report in {}",
                r.iterations,
                r.final_tiles,
                r.peak_bytes_resident,
                r.mlups,
                r.mlups_bbox,
                cfg.output.display()
            );
        }
        Command::Compare { config, output, workers } => {
            let opts = RunOptions {
                output,
                workers,
                ..Default::default()
            };
            let cfg = opts.apply(&load_config(&config)?)?;
            let r = compare(&cfg)?;
            println!(
                "peak bytes static {} progressive {}; field diff max {:e}; report in {}",
                r.static_run.peak_bytes_resident,
                r.progressive_run.peak_bytes_resident,
                r.worst.active_max_diff,
                cfg.output.display()
            );
        }
        Command::GenGeometry {
            kind,
            dims,
            width,
            tile,
            output,
        } => {
            let d = [dims[0], dims[1], dims[2]];
            if d.contains(&0) || width == 0 || tile == 0 {
                return Err(Error::Config("dimensions, width and tile must be positive".into()));
            }
            let g = match kind {
                Fixture::OpenBox => open_box(d),
                Fixture::StraightChannel => straight_channel(d, width),
                Fixture::LChannel => l_channel(d, tile, width),
                Fixture::ChannelGrid => channel_grid(d, tile, width),
            };
            save_geometry(&g, &output)?;
            println!("{}: {} solid of {} cells", output.display(), g.solid_count(), g.flags().len());
        }
        Command::CheckTopology { path } => print!("{}", describe(&load_topology(&path)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
