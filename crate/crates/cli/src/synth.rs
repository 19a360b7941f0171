use predictability::io::{write_canonical, UserSequence};
use predictability::synth::{
    gen_grammar, gen_markov, is_ergodic, markov_entropy_rate, markov_optimal_accuracy, random_transition_matrix,
    rng_from_seed, Ergodicity, GrammarSpec, MarkovSpec,
};
use predictability::predictability_bound;
use serde::Serialize;

use crate::args::{Source, SynthArgs};
use crate::run::{sidecar_path, CliError, CliResult, Run};

#[derive(Serialize)]
struct Oracle {
    entropy_rate: f64,
    optimal_accuracy: f64,
    ergodicity: Ergodicity,
    /// Bound at the true entropy rate.
    pi_max: f64,
}

#[derive(Serialize)]
struct SynthBlock<'a> {
    generator: &'static str,
    parameters: &'a Source,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    transition: Option<Vec<Vec<f64>>>,
    /// Present only where closed-form values exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<Oracle>,
}

fn generator_err(e: predictability::Error) -> CliError {
    if e.is_numeric() {
        CliError::Numeric { file: None, message: e.to_string() }
    } else {
        CliError::Usage(e.to_string())
    }
}

pub fn synth_cmd(run: &mut Run, args: &SynthArgs) -> CliResult<()> {
    let (seq, block) = match &args.source {
        Source::Markov { states, n, stay, seed } => {
            run.set_seed(*seed);
            let mut rng = rng_from_seed(*seed);
            let spec = MarkovSpec::new(random_transition_matrix(*states, *stay, &mut rng), *seed)
                .map_err(generator_err)?;
            let seq = gen_markov(&spec, *n).map_err(generator_err)?;
            let entropy_rate = markov_entropy_rate(&spec).map_err(generator_err)?;
            let pi_max = if *states < 2 {
                1.0
            } else {
                predictability_bound(entropy_rate, *states).map_err(generator_err)?.pi_max
            };
            let oracle = Oracle {
                entropy_rate,
                optimal_accuracy: markov_optimal_accuracy(&spec).map_err(generator_err)?,
                ergodicity: is_ergodic(&spec.transition),
                pi_max,
            };
            let block = SynthBlock {
                generator: "markov",
                parameters: &args.source,
                n: seq.len(),
                transition: Some(spec.transition),
                oracle: Some(oracle),
            };
            (seq, block)
        }
        Source::Grammar { alphabet, depth, eps, seed } => {
            run.set_seed(*seed);
            let spec = GrammarSpec::with_random_rules(*alphabet, *depth, *eps, *seed).map_err(generator_err)?;
            let seq = gen_grammar(&spec).map_err(generator_err)?;
            let block = SynthBlock {
                generator: "grammar",
                parameters: &args.source,
                n: seq.len(),
                transition: None,
                oracle: None,
            };
            (seq, block)
        }
    };

    let mut buf = Vec::new();
    write_canonical(&mut buf, &[UserSequence::from_sequence(args.user.clone(), &seq)])
        .map_err(|e| CliError::core("<output>", e))?;
    let out = args.output.as_deref();
    run.write(out, &buf)?;
    if let Some(path) = args.oracle.clone().or_else(|| sidecar_path(out)) {
        run.write_json(Some(&path), &block)?;
    }
    Ok(())
}
