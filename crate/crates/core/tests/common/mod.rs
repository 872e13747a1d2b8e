#![allow(dead_code)]

use std::collections::BTreeMap;

use sail_core::backend::{make_consistency_mock, ConsistencyMock, ConsistencyWorld};
use sail_core::synthetic::{synthetic_word, SyntheticSpec, SyntheticWorld};
use sail_core::{
    CompletionBackend, CompletionService, LanguageNames, LanguagePair, SailConfig, SailEngine,
    TemplateRegistry,
};

pub fn pair() -> LanguagePair {
    "de-fr".parse().unwrap()
}

pub fn world(n: usize, noise: f64, seed: u64) -> SyntheticWorld {
    SyntheticWorld::generate(SyntheticSpec {
        noise,
        seed,
        ..SyntheticSpec::new(pair(), n, n.min(20))
    })
    .unwrap()
}

pub fn mock(world: ConsistencyWorld) -> Box<dyn CompletionBackend> {
    Box::new(
        ConsistencyMock::new(
            "mock",
            world,
            &TemplateRegistry::builtin(),
            &LanguageNames::builtin(),
        )
        .unwrap(),
    )
}

pub fn service(world: ConsistencyWorld) -> CompletionService {
    CompletionService::new(mock(world), None)
}

pub fn config(n_f: usize) -> SailConfig {
    SailConfig {
        n_frequent: n_f,
        concurrency: 4,
        ..SailConfig::default()
    }
}

/// A world whose forward and backward maps are given by index functions
/// over `n` synthetic words per side.
pub fn mapped_world(
    n: usize,
    forward: impl Fn(usize) -> usize,
    backward: impl Fn(usize) -> usize,
) -> ConsistencyWorld {
    let p = pair();
    let fwd: BTreeMap<String, String> = (0..n)
        .map(|i| (synthetic_word("de", i), synthetic_word("fr", forward(i))))
        .collect();
    let bwd: BTreeMap<String, String> = (0..n)
        .map(|i| (synthetic_word("fr", i), synthetic_word("de", backward(i))))
        .collect();
    make_consistency_mock(
        [(p.clone(), fwd), (p.reversed(), bwd)].into(),
        BTreeMap::new(),
    )
}

pub fn engine<'a>(
    w: &'a SyntheticWorld,
    service: &'a CompletionService,
    templates: &'a TemplateRegistry,
    names: &'a LanguageNames,
    cfg: SailConfig,
) -> SailEngine<'a> {
    SailEngine::new(pair(), &w.x, &w.y, service, templates, names, cfg).unwrap()
}
