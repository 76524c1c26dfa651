use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    argmax_first, reasons_as_patterns, EventSink, Failure, RunError, RunRecord, Runner, SearchEnv,
    StopReason, StrategyParams,
};
use crate::llm::CallCounter;
use crate::template::TemplateRole;
use crate::types::{PromptCandidate, RunConfig, TaskSpec};

pub const DEFAULT_EXPLORATION_WEIGHT: f64 = 1.0;

struct Node {
    candidate: PromptCandidate,
    parent: Option<usize>,
    children: Vec<usize>,
    depth: u32,
    visits: u32,
    reward: f64,
}

/// Tree search over single-reason edits, scored by validation accuracy.
///
/// Each step descends from the root by UCT (mean reward plus exploration
/// bonus) to the first node with room for children, then adds up to
/// `breadth` children to it from one round of failure analysis. Each child's
/// validation score is its reward and is backed up to the root. The run
/// ends when `total_budget` candidates exist or no node below `depth` can
/// take another child; the iteration count of the config is not used.
#[allow(clippy::too_many_arguments)]
pub fn run_mcts_lite(
    env: &SearchEnv<'_>,
    task: &TaskSpec,
    p0: &PromptCandidate,
    config: &RunConfig,
    depth: u32,
    breadth: usize,
    total_budget: usize,
    sink: &mut dyn EventSink,
) -> Result<RunRecord, RunError> {
    if depth == 0 || breadth == 0 || total_budget == 0 {
        return Err(RunError::Params("depth, breadth and total budget must be >= 1".into()));
    }
    let params = StrategyParams::MctsLite {
        depth,
        breadth,
        total_budget,
        exploration_weight: DEFAULT_EXPLORATION_WEIGHT,
    };
    let counter = CallCounter::new(env.model);
    let mut run = Runner::new(env, &counter, task, config, params, sink)?;
    let root = run.start(p0)?;
    let outcome = search(&mut run, root, depth, breadth, total_budget);
    Ok(run.finish(outcome))
}

fn search(
    run: &mut Runner<'_, '_>,
    root: PromptCandidate,
    max_depth: u32,
    breadth: usize,
    budget: usize,
) -> Result<StopReason, Failure> {
    let root = run.score(root, 0)?;
    let mut tree = vec![Node {
        reward: root.val_score.unwrap_or_default(),
        candidate: root,
        parent: None,
        children: Vec::new(),
        depth: 0,
        visits: 1,
    }];
    let mut generated = 0;
    let mut t = 0u32;
    while generated < budget {
        let Some(leaf) = select(&tree, 0, max_depth, breadth) else {
            break;
        };
        t += 1;
        let prompt = tree[leaf].candidate.clone();
        let report = run.train_report(&prompt, t)?;
        let Some(failures) = run.sample(&report, t, 0)? else {
            return Ok(StopReason::NoFailures);
        };
        let scope = format!("i{t}-");
        let reasons = run.analyze(&prompt, &failures, t, &scope)?;
        let patterns = reasons_as_patterns(&reasons, &scope);
        let slots = (breadth - tree[leaf].children.len()).min(budget - generated);
        let used = slots.min(patterns.len());
        run.record_patterns(&prompt, &patterns, &patterns[..used], t);

        let mut children = Vec::with_capacity(slots);
        for i in 0..slots {
            let id = run.fresh_id();
            let pattern = &patterns[i % patterns.len()];
            let edited = run.agents.rewrite(
                TemplateRole::Editor,
                &prompt,
                core::slice::from_ref(pattern),
                &id,
                t,
            )?;
            let child = run.score(edited, t)?;
            let reward = child.val_score.unwrap_or_default();
            let index = tree.len();
            tree.push(Node {
                candidate: child,
                parent: Some(leaf),
                children: Vec::new(),
                depth: tree[leaf].depth + 1,
                visits: 1,
                reward,
            });
            tree[leaf].children.push(index);
            backup(&mut tree, leaf, reward);
            children.push(index);
        }
        generated += slots;

        let scores: Vec<f64> = children.iter().map(|&i| tree[i].reward).collect();
        let best = children[argmax_first(&scores).expect("a step adds at least one child")];
        let incumbent = tree[best].candidate.clone();
        run.select(t, &incumbent, vec![incumbent.id.clone()]);
        run.complete_iteration(t, slots);
    }
    Ok(StopReason::IterationsExhausted)
}

fn backup(tree: &mut [Node], from: usize, reward: f64) {
    let mut at = Some(from);
    while let Some(i) = at {
        tree[i].visits += 1;
        tree[i].reward += reward;
        at = tree[i].parent;
    }
}

/// The node to expand next, or `None` if the subtree is saturated.
fn select(tree: &[Node], at: usize, max_depth: u32, breadth: usize) -> Option<usize> {
    let node = &tree[at];
    if node.depth >= max_depth {
        return None;
    }
    if node.children.len() < breadth {
        return Some(at);
    }
    let mut order: Vec<(usize, f64)> = node
        .children
        .iter()
        .map(|&c| (c, uct(&tree[c], node.visits)))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    order
        .into_iter()
        .find_map(|(c, _)| select(tree, c, max_depth, breadth))
}

fn uct(node: &Node, parent_visits: u32) -> f64 {
    let mean = node.reward / node.visits as f64;
    let bonus = libm::sqrt(libm::log(parent_visits as f64) / node.visits as f64);
    mean + DEFAULT_EXPLORATION_WEIGHT * bonus
}
