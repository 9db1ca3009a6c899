use sonogen_cli::{
    cmd_evaluate, cmd_ingest, cmd_prepare, cmd_report, cmd_train, cmd_transfer, parse_config,
    CmdStatus, RunFlags,
};

const USAGE: &str = "\
sonogen - pseudo-acoustic sonar image synthesis pipeline

USAGE:
    sonogen <SUBCOMMAND> --config <path> [--seed <u64>] [--force] [--jobs <n>]

SUBCOMMANDS:
    ingest      scan the content/style directories and write dataset manifests
    prepare     preprocess content (grayscale, matte, smooth, resize) and style images
    train       train the style-transfer model on the prepared images
    transfer    generate pseudo-acoustic images from the trained checkpoint
    evaluate    score generated images (NIQE, BRISQUE) and paired similarity
    report      render the evaluation results as CSV and Markdown tables

FLAGS:
    --config <path>   pipeline configuration file (required)
    --seed <u64>      override the configured seed
    --force           regenerate existing outputs / replace an existing report
    --jobs <n>        worker threads for batch stages (default 1)

Set SONO_LOG to error|warn|info|debug to control logging.";

struct Cli {
    subcommand: String,
    config: std::path::PathBuf,
    flags: RunFlags,
}

fn parse_args(args: &[String]) -> Result<Cli, String> {
    let mut it = args.iter();
    let subcommand = it.next().ok_or("missing subcommand")?.clone();
    let mut config = None;
    let mut flags = RunFlags::default();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                let v = it.next().ok_or("--config needs a path")?;
                config = Some(std::path::PathBuf::from(v));
            }
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                flags.seed_override =
                    Some(v.parse().map_err(|_| format!("bad --seed value '{v}'"))?);
            }
            "--force" => flags.force = true,
            "--jobs" => {
                let v = it.next().ok_or("--jobs needs a value")?;
                flags.jobs = v.parse().map_err(|_| format!("bad --jobs value '{v}'"))?;
                if flags.jobs == 0 {
                    return Err("--jobs must be at least 1".into());
                }
            }
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(Cli {
        subcommand,
        config: config.ok_or("--config is required")?,
        flags,
    })
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("SONO_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        println!("{USAGE}");
        return;
    }
    let cli = match parse_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            std::process::exit(1);
        }
    };

    let run = || -> anyhow::Result<CmdStatus> {
        let cfg = parse_config(&cli.config)?;
        match cli.subcommand.as_str() {
            "ingest" => cmd_ingest(&cfg, &cli.flags),
            "prepare" => cmd_prepare(&cfg, &cli.flags),
            "train" => cmd_train(&cfg, &cli.flags),
            "transfer" => cmd_transfer(&cfg, &cli.flags),
            "evaluate" => cmd_evaluate(&cfg, &cli.flags),
            "report" => cmd_report(&cfg, &cli.flags),
            other => anyhow::bail!("unknown subcommand '{other}'"),
        }
    };

    match run() {
        Ok(CmdStatus::Ok) => {}
        Ok(CmdStatus::Partial { failures }) => {
            eprintln!("completed with {failures} per-image failures (see warnings)");
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
