//! Writes the synthetic test fixture: 500 labels across 25 product
//! categories, 50 test instances with ground truth and 200 unlabeled train
//! instances. Output is a pure function of the seed.
//!
//! cargo run -p genrank-cli --example make_fixture -- crates/cli/tests/fixtures

use std::fs;
use std::path::PathBuf;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const TOPICS: &[&[&str]] = &[
    &[
        "kettle", "teapot", "brew", "boil", "spout", "infuser", "loose", "leaf",
    ],
    &[
        "mouse",
        "wireless",
        "gaming",
        "dpi",
        "ergonomic",
        "scroll",
        "optical",
        "click",
    ],
    &[
        "keyboard",
        "mechanical",
        "switch",
        "keycap",
        "backlit",
        "tenkeyless",
        "typing",
        "layout",
    ],
    &[
        "tent", "camping", "sleeping", "bag", "lantern", "stove", "hiking", "trail",
    ],
    &[
        "yoga", "mat", "block", "strap", "pilates", "stretch", "foam", "roller",
    ],
    &[
        "guitar", "string", "acoustic", "pick", "capo", "tuner", "fret", "amp",
    ],
    &[
        "blender", "smoothie", "juicer", "pitcher", "puree", "motor", "ice", "crush",
    ],
    &[
        "dog", "leash", "collar", "harness", "chew", "kibble", "puppy", "treat",
    ],
    &[
        "cat",
        "litter",
        "scratcher",
        "catnip",
        "kitten",
        "feeder",
        "fountain",
        "perch",
    ],
    &[
        "novel",
        "mystery",
        "detective",
        "thriller",
        "paperback",
        "chapter",
        "author",
        "series",
    ],
    &[
        "cookbook", "recipe", "baking", "bread", "pastry", "dessert", "vegan", "kitchen",
    ],
    &[
        "headphones",
        "earbuds",
        "bluetooth",
        "noise",
        "cancelling",
        "bass",
        "audio",
        "charging",
    ],
    &[
        "camera",
        "lens",
        "tripod",
        "shutter",
        "zoom",
        "flash",
        "mirrorless",
        "sensor",
    ],
    &[
        "bicycle", "helmet", "pedal", "saddle", "chain", "brake", "tire", "pump",
    ],
    &[
        "garden", "hose", "nozzle", "trowel", "seed", "planter", "soil", "pruner",
    ],
    &[
        "watch",
        "strap",
        "chronograph",
        "quartz",
        "dial",
        "bezel",
        "sapphire",
        "band",
    ],
    &[
        "pillow", "memory", "cushion", "mattress", "topper", "sheet", "duvet", "bedding",
    ],
    &[
        "drill", "cordless", "bit", "driver", "impact", "battery", "torque", "chuck",
    ],
    &[
        "lamp", "desk", "led", "bulb", "dimmable", "shade", "floor", "light",
    ],
    &[
        "backpack", "laptop", "travel", "pocket", "zipper", "luggage", "carry", "daypack",
    ],
    &[
        "puzzle", "jigsaw", "piece", "board", "game", "dice", "card", "strategy",
    ],
    &[
        "sunscreen",
        "lotion",
        "moisturizer",
        "serum",
        "skin",
        "spf",
        "cream",
        "hydrating",
    ],
    &[
        "vacuum", "robot", "suction", "filter", "cordless", "dust", "carpet", "mop",
    ],
    &[
        "charger", "cable", "usb", "adapter", "power", "bank", "fast", "port",
    ],
    &[
        "socks",
        "wool",
        "cotton",
        "ankle",
        "crew",
        "cushioned",
        "running",
        "sport",
    ],
];

const MODIFIERS: &[&str] = &[
    "premium",
    "compact",
    "portable",
    "classic",
    "deluxe",
    "mini",
    "pro",
    "large",
    "small",
    "black",
    "white",
    "blue",
    "red",
    "stainless",
    "steel",
    "bamboo",
    "set",
    "pack",
    "kit",
    "edition",
    "durable",
    "lightweight",
    "heavy",
    "duty",
    "adjustable",
    "universal",
];

const BRANDS: &[&str] = &[
    "acme", "nordik", "zephyr", "lumo", "tarn", "velo", "quill", "orbit", "kestrel", "maple",
];

const FILLER: &[&str] = &[
    "the", "with", "for", "and", "is", "a", "designed", "great", "quality", "use", "daily", "easy",
    "gift", "home", "includes", "perfect", "made", "features", "your", "every",
];

fn phrase(rng: &mut ChaCha8Rng, topic: &[&str], topic_words: usize, extra: usize) -> Vec<String> {
    let mut words: Vec<String> = topic
        .choose_multiple(rng, topic_words)
        .map(|w| w.to_string())
        .collect();
    for _ in 0..extra {
        let pool = if rng.random_bool(0.3) {
            BRANDS
        } else {
            MODIFIERS
        };
        words.push(pool.choose(rng).unwrap().to_string());
    }
    words.shuffle(rng);
    words
}

fn content(rng: &mut ChaCha8Rng, topic: &[&str], len: usize) -> String {
    (0..len)
        .map(|_| {
            if rng.random_bool(0.4) {
                topic.choose(rng).unwrap().to_string()
            } else if rng.random_bool(0.3) {
                MODIFIERS.choose(rng).unwrap().to_string()
            } else {
                FILLER.choose(rng).unwrap().to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_jsonl(path: PathBuf, records: &[serde_json::Value]) {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).unwrap());
        out.push('\n');
    }
    fs::write(&path, out).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20240607);

    let per_topic = 500 / TOPICS.len();
    let mut labels = Vec::new();
    let mut topic_labels: Vec<Vec<(String, Vec<String>)>> = vec![Vec::new(); TOPICS.len()];
    let mut seen = std::collections::HashSet::new();
    for (t, topic) in TOPICS.iter().enumerate() {
        while topic_labels[t].len() < per_topic {
            let words = {
                let (a, b) = (rng.random_range(1..=2), rng.random_range(1..=2));
                phrase(&mut rng, topic, a, b)
            };
            let text = words.join(" ");
            if !seen.insert(text.clone()) {
                continue;
            }
            let lid = format!("L{:04}", labels.len());
            labels.push(json!({"uid": lid, "title": text}));
            topic_labels[t].push((lid, words));
        }
    }

    let mut tests = Vec::new();
    let mut truth = Vec::new();
    for i in 0..50 {
        let t = rng.random_range(0..TOPICS.len());
        let title = {
            let (a, b) = (rng.random_range(2..=3), rng.random_range(1..=2));
            phrase(&mut rng, TOPICS[t], a, b)
        };
        let len = rng.random_range(10..=40);
        let uid = format!("T{i:03}");
        tests.push(json!({"uid": uid, "title": title.join(" "), "content": content(&mut rng, TOPICS[t], len)}));
        // Relevant: labels of the same category sharing a title word first,
        // topped up with random labels of that category.
        let mut ranked: Vec<&(String, Vec<String>)> = topic_labels[t].iter().collect();
        ranked.shuffle(&mut rng);
        ranked.sort_by_key(|(_, words)| {
            std::cmp::Reverse(words.iter().filter(|w| title.contains(w)).count())
        });
        let n = rng.random_range(2..=6);
        let lids: Vec<&str> = ranked.iter().take(n).map(|(lid, _)| lid.as_str()).collect();
        truth.push(json!({"uid": uid, "labels": lids}));
    }

    let mut train = Vec::new();
    for i in 0..200 {
        let t = rng.random_range(0..TOPICS.len());
        let title = {
            let (a, b) = (rng.random_range(2..=3), rng.random_range(0..=2));
            phrase(&mut rng, TOPICS[t], a, b)
        };
        let len = rng.random_range(5..=25);
        train.push(json!({"uid": format!("R{i:04}"), "title": title.join(" "), "content": content(&mut rng, TOPICS[t], len)}));
    }

    write_jsonl(dir.join("labels.jsonl"), &labels);
    write_jsonl(dir.join("test.jsonl"), &tests);
    write_jsonl(dir.join("truth.jsonl"), &truth);
    write_jsonl(dir.join("train.jsonl"), &train);
}
