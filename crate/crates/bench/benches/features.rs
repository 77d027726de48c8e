use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gazeboost::corpus::{BigramTable, SentenceSet, Token};
use gazeboost::features::{am_scores, build_matrix, contingency, FeatureGroup, FeatureGroupSpec};
use gazeboost::Lexicon;

fn synthetic_corpus(n_sentences: usize, seed: u64) -> (SentenceSet, Lexicon, BigramTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..500)
        .map(|w| {
            let letter = (b'a' + (w % 26) as u8) as char;
            std::iter::repeat_n(letter, 2 + w % 9).collect()
        })
        .collect();

    let mut lexicon = Lexicon::new("freq", vec!["count".to_string()]);
    for (w, word) in vocab.iter().enumerate() {
        lexicon.insert(word, vec![Some((w + 1) as f64 * 3.0)]);
    }

    let mut sequences: Vec<Vec<String>> = Vec::new();
    let mut sentences = Vec::new();
    for s in 0..n_sentences {
        let len = rng.gen_range(5..15);
        let words: Vec<String> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
            .collect();
        sequences.push(words.clone());
        sentences.push(
            words
                .into_iter()
                .enumerate()
                .map(|(i, surface)| Token {
                    sentence_id: s as u32 + 1,
                    rank: i as u32 + 1,
                    normalized: surface.clone(),
                    surface,
                    lemma: None,
                    pos: None,
                    targets: None,
                })
                .collect(),
        );
    }
    let bigrams = BigramTable::from_token_sequences(&sequences);
    (
        SentenceSet {
            sentences,
            has_targets: false,
        },
        lexicon,
        bigrams,
    )
}

fn bench_build_matrix(c: &mut Criterion) {
    let (set, lexicon, bigrams) = synthetic_corpus(1000, 3);
    let spec = FeatureGroupSpec::only([
        FeatureGroup::Length,
        FeatureGroup::Position,
        FeatureGroup::Frequency,
        FeatureGroup::BigramAm,
    ]);
    c.bench_function("build_matrix_1k_sentences", |b| {
        b.iter(|| {
            build_matrix(
                &set,
                std::slice::from_ref(&(lexicon.clone(), FeatureGroup::Frequency)),
                Some(&bigrams),
                &spec,
            )
            .unwrap()
        })
    });
}

fn bench_association_measures(c: &mut Criterion) {
    let (_, _, bigrams) = synthetic_corpus(1000, 3);
    let pairs: Vec<(String, String)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..1000)
            .map(|_| {
                let w = |rng: &mut ChaCha8Rng| {
                    let w: usize = rng.gen_range(0..500);
                    let letter = (b'a' + (w % 26) as u8) as char;
                    std::iter::repeat_n(letter, 2 + w % 9).collect::<String>()
                };
                (w(&mut rng), w(&mut rng))
            })
            .collect()
    };
    c.bench_function("am_scores_1k_pairs", |b| {
        b.iter(|| {
            pairs
                .iter()
                .filter_map(|(w1, w2)| contingency(&bigrams, w1, w2))
                .map(|t| am_scores(&t))
                .filter(|s| s.pmi.is_some())
                .count()
        })
    });
}

criterion_group!(benches, bench_build_matrix, bench_association_measures);
criterion_main!(benches);
