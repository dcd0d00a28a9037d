use clap::Parser;

fn main() {
    env_logger::init();
    let args = halfplane_waves::cli::Args::parse();
    std::process::exit(halfplane_waves::cli::main_with_args(args));
}
