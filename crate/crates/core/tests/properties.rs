use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;

use snipex_core::corpus::{build_corpus, BlockType, PostBlockRecord, PostRecord, PostType, DEFAULT_TAG_FILTER};
use snipex_core::stats::{bootstrap_diff, rates, BootstrapConfig, TruthTable};

const TAGS: [&str; 4] = ["<python>", "<python><numpy>", "<python-3.x>", "<java>"];

fn at(day: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2010 + (day % 9) as i32, 1 + day % 12, 1 + day % 28, 0, 0, 0)
        .unwrap()
}

#[derive(Debug, Clone)]
struct Dump {
    posts: Vec<PostRecord>,
    blocks: Vec<PostBlockRecord>,
}

/// Questions with ids 1..=q, answers after them pointing at random
/// questions (some missing), blocks on random posts.
fn dump() -> impl Strategy<Value = Dump> {
    (1u64..8, 0usize..20, 0usize..40).prop_flat_map(|(q, a, b)| {
        let questions = proptest::collection::vec((0usize..TAGS.len(), proptest::option::of(0u64..30)), q as usize);
        let answers = proptest::collection::vec((1u64..q + 3, -5i64..20, 0u32..400), a);
        let blocks = proptest::collection::vec((0u64..q + a as u64 + 2, 0i64..4, "[a-z =()\n]{0,30}"), b);
        (Just(q), questions, answers, blocks).prop_map(|(q, questions, answers, blocks)| {
            let mut posts: Vec<PostRecord> = questions
                .into_iter()
                .enumerate()
                .map(|(i, (tag, accepted))| PostRecord {
                    id: i as u64 + 1,
                    parent_id: None,
                    post_type: PostType::Question,
                    score: 0,
                    tags: TAGS[tag].into(),
                    created_at: at(i as u32),
                    accepted_answer_id: accepted.map(|x| x + q + 1),
                })
                .collect();
            for (i, (parent, score, day)) in answers.into_iter().enumerate() {
                posts.push(PostRecord {
                    id: q + 1 + i as u64,
                    parent_id: Some(parent),
                    post_type: PostType::Answer,
                    score,
                    tags: String::new(),
                    created_at: at(day),
                    accepted_answer_id: None,
                });
            }
            let blocks = blocks
                .into_iter()
                .enumerate()
                .map(|(i, (post, kind, content))| PostBlockRecord {
                    block_id: 1000 + i as u64,
                    post_id: post,
                    block_type: BlockType::from_type_id(kind),
                    root_block_version_id: 1000 + i as u64,
                    line_count: snipex_core::corpus::count_lines(&content),
                    length: content.chars().count() as u32,
                    content,
                })
                .collect();
            Dump { posts, blocks }
        })
    })
}

proptest! {
    #[test]
    fn corpus_is_deterministic_and_tag_exact(d in dump(), rot_posts in 0usize..50, rot_blocks in 0usize..50) {
        let (first, summary) = build_corpus(d.posts.clone(), d.blocks.clone(), DEFAULT_TAG_FILTER).unwrap();
        let mut posts = d.posts.clone();
        let mut blocks = d.blocks.clone();
        if !posts.is_empty() { let n = rot_posts % posts.len(); posts.rotate_left(n); }
        if !blocks.is_empty() { let n = rot_blocks % blocks.len(); blocks.rotate_left(n); }
        let (mut second, summary2) = build_corpus(posts, blocks, DEFAULT_TAG_FILTER).unwrap();
        let mut first_sorted = first.clone();
        first_sorted.sort_by_key(|s| s.snippet_id);
        second.sort_by_key(|s| s.snippet_id);
        prop_assert_eq!(&first_sorted, &second);
        prop_assert_eq!(summary, summary2);

        let post = |id: u64| d.posts.iter().find(|p| p.id == id);
        for s in &first {
            prop_assert_eq!(&s.tags, &vec!["python".to_string()]);
            let answer = post(s.post_id).unwrap();
            let question = post(answer.parent_id.unwrap()).unwrap();
            prop_assert_eq!(question.tags.as_str(), "<python>");
            prop_assert_eq!(s.is_accepted, question.accepted_answer_id == Some(s.post_id));
            prop_assert_eq!(s.created_at, answer.created_at);
        }
        prop_assert_eq!(summary.code_blocks_kept as usize, first.len());
    }

    #[test]
    fn rates_stay_in_range(a in 0u64..10_000, b in 0u64..10_000, c in 0u64..10_000, d in 0u64..10_000) {
        let t = TruthTable::new(a, b, c, d);
        prop_assume!(t.total() > 0);
        let r = rates(&t).unwrap();
        for v in [r.first, r.second, r.overall, r.both, r.first_not_second, r.second_not_first] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
        prop_assert!(r.both <= r.first.min(r.second) + 1e-9);
        prop_assert!(r.overall + 1e-9 >= r.first.max(r.second));
        prop_assert!((r.first + r.second - r.both - r.overall).abs() < 1e-9);
    }
}

/// Normal approximation to the difference of two proportions as an oracle
/// for the percentile interval at large n.
#[test]
fn bootstrap_interval_agrees_with_normal_theory() {
    let n = 20_000;
    let a: Vec<bool> = (0..n).map(|i| i % 10 < 3).collect();
    let b: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect();
    let cfg = BootstrapConfig {
        iterations: 2_000,
        seed: 7,
        partitions: 1,
    };
    let r = bootstrap_diff(&a, &b, &cfg).unwrap();
    let se = 100.0 * ((0.30 * 0.70 + 0.25 * 0.75) / n as f64).sqrt();
    assert!(r.ci_low < 5.0 && 5.0 < r.ci_high, "{r:?}");
    assert!((r.mean_diff - 5.0).abs() < 0.1, "{r:?}");
    let width = r.ci_high - r.ci_low;
    let expected = 2.0 * 1.959_964 * se;
    assert!((width - expected).abs() / expected < 0.1, "width {width} vs {expected}");
}
