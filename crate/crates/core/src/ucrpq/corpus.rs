//! Benchmark query collections with their expected recursion classes.

use super::Class::{self, *};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusQuery {
    pub id: &'static str,
    pub text: &'static str,
    pub classes: &'static [Class],
}

const fn q(id: &'static str, text: &'static str, classes: &'static [Class]) -> CorpusQuery {
    CorpusQuery { id, text, classes }
}

/// Queries over a Yago-style knowledge graph. Abbreviations: `IsL`/`isL`
/// IsLocatedIn, `dw` dealsWith, `haa` hasAcademicAdvisor, `SA`
/// Shannon_Airport, `JLT` John_Lawrence_Toole, `wce`
/// wikicat_Capitals_in_Europe.
pub const YAGO: [CorpusQuery; 25] = [
    q("Q1", "?x <- ?x isMarriedTo/livesIn/IsL+/dw+ Argentina", &[C2, C5, C6]),
    q("Q2", "?x <- ?x hasChild/livesIn/IsL+/dw+ Japan", &[C2, C5, C6]),
    q("Q3", "?x <- ?x influences/livesIn/IsL+/dw+ Sweden", &[C2, C5, C6]),
    q("Q4", "?x <- ?x livesIn/IsL+/dw+ United_States", &[C2, C5, C6]),
    q("Q5", "?x <- ?x hasSuccessor/livesIn/IsL+/dw+ India", &[C2, C5, C6]),
    q("Q6", "?x <- ?x hasPredecessor/livesIn/IsL+/dw+ Germany", &[C2, C5, C6]),
    q("Q7", "?x <- ?x haa/livesIn/IsL+/dw+ Netherlands", &[C2, C5, C6]),
    q("Q8", "?x <- ?x IsL+/dw+ United_States", &[C2, C6]),
    q("Q9", "?x <- ?x (actedIn/-actedIn)+ Kevin_Bacon", &[C2]),
    q("Q10", "?area <- wce -type/(IsL+/dw|dw) ?area", &[C3, C4, C5]),
    q(
        "Q11",
        "?person <- ?person isMarriedTo+/owns/IsL+|owns/IsL+ USA",
        &[C2, C4, C5],
    ),
    q("Q12", "?a,?b <- ?a IsL+/dw ?b", &[C4]),
    q("Q13", "?a,?b <- ?a IsL+/dw+ ?b", &[C6]),
    q(
        "Q14",
        "?a,?b,?c <- ?a wasBornIn/IsL+ ?b, ?b isConnectedTo+ ?c",
        &[C5, C6],
    ),
    q("Q15", "?a,?b,?c <- ?a (IsL|isConnectedTo)+ ?b, ?a wasBornIn ?c", &[C5]),
    q(
        "Q16",
        "?a,?b,?c <- ?a wasBornIn/IsL+ Japan, ?b isConnectedTo+ ?c",
        &[C2, C5],
    ),
    q("Q17", "?a <- ?a IsL+/(isConnectedTo|dw)+ Japan", &[C2, C6]),
    q("Q18", "?a,?c <- ?a IsL+ Japan, ?a isConnectedTo+ ?c", &[C2, C6]),
    q("Q19", "?a <- ?a IsL+/IsL Japan", &[C2, C4]),
    q("Q20", "?a <- ?a IsL+/isConnectedTo+/dw+ Japan", &[C2, C6]),
    q("Q21", "?a,?b <- ?a (isL|dw|rdfs:subClassOf|isConnectedTo)+ ?b", &[C1]),
    q("Q22", "?a <- ?a (isConnectedTo/-isConnectedTo)+ SA", &[C2]),
    q("Q23", "?a <- ?a (wasBornIn/isL/-wasBornIn)+ JLT", &[C2]),
    q("Q24", "?x <- Jay_Kappraff (livesIn/isL/-livesIn)+ ?x", &[C3]),
    q("Q25", "?a,?b <- ?a (actedIn/-actedIn)+/hasChild+ ?b", &[C6]),
];

/// Queries over a Uniprot-style protein graph. Abbreviations: `int`
/// interacts, `enc` encodes, `occ` occurs, `hKw` hasKeyword, `ref`
/// reference, `auth` authoredBy, `pub` publishes.
pub const UNIPROT: [CorpusQuery; 25] = [
    q("Q26", "?x,?y <- ?x -hKw/(ref/-ref)+ ?y", &[C5]),
    q("Q27", "?x,?y <- ?x -hKw/(enc/-enc)+ ?y", &[C5]),
    q("Q28", "?x,?y <- ?x -hKw/(occ/-occ)+ ?y", &[C5]),
    q("Q29", "?x,?y <- ?x int/(enc/-enc)+ ?y", &[C5]),
    q("Q30", "?x,?y <- ?x int/(occ/-occ)+ ?y", &[C5]),
    q("Q31", "?x,?y <- ?x int+/(occ/-occ)+ ?y", &[C6]),
    q("Q32", "?x,?y <- ?x int+/(enc/-enc)+ ?y", &[C6]),
    q("Q33", "?x,?y <- ?x int+/(occ/-occ)+/(hKw/-hKw)+ ?y", &[C6]),
    q("Q34", "?x,?y <- ?x -hKw/int/ref/(auth/-auth)+ ?y", &[C5]),
    q("Q35", "?x,?y <- ?x (enc/-enc)+/hKw ?y", &[C4]),
    q("Q36", "?x <- ?x (enc/-enc)+ C", &[C2]),
    q(
        "Q37",
        "?x,?y,?z,?t <- ?x (enc/-enc)+ ?y, ?x int+ ?z, ?x ref ?t",
        &[C5, C6],
    ),
    q("Q38", "?x,?y <- ?x (int|(enc/-enc))+ ?y, C (occ/-occ)+ ?y", &[C3, C6]),
    q("Q39", "?x <- ?x int+/ref ?y, C (auth/-auth)+ ?y", &[C3, C4]),
    q("Q40", "?x <- ?x int+/ref ?y, C -pub/(auth/-auth)+ ?y", &[C3, C4, C5]),
    q("Q41", "?x <- C -pub/(auth/-auth)+ ?x", &[C3, C5]),
    q("Q42", "?x,?y <- ?x -occ/int+/occ ?y", &[C4, C5]),
    q("Q43", "?x,?y <- ?x (-ref/ref)+ ?y", &[C1]),
    q("Q44", "?x,?y <- ?x int/ref/(-ref/ref)+ ?y", &[C5]),
    q("Q45", "?x <- C (ref/-ref)+ ?x", &[C3]),
    q("Q46", "?x,?y <- ?x (-ref/ref)+/(auth|pub) ?y", &[C4]),
    q("Q47", "?x <- ?x (enc/-enc | occ/-occ)+ C", &[C2]),
    q("Q48", "?x <- C int/(enc/-enc|occ/-occ)+ ?x", &[C3, C5]),
    q("Q49", "?x <- C (enc/-enc)+ ?x", &[C3]),
    q("Q50", "?x <- C (occ/-occ)+ ?x", &[C3]),
];

/// One query per class.
pub const CLASS_EXEMPLARS: [CorpusQuery; 6] = [
    q("C1", "?x,?y <- ?x a+ ?y", &[C1]),
    q("C2", "?x <- ?x a+ C", &[C2]),
    q("C3", "?x <- C a+ ?x", &[C3]),
    q("C4", "?x,?y <- ?x a+/b ?y", &[C4]),
    q("C5", "?x,?y <- ?x b/a+ ?y", &[C5]),
    q("C6", "?x,?y <- ?x a+/b+ ?y", &[C6]),
];

/// `?x,?y <- ?x a1+/a2+/.../an+ ?y`.
pub fn concatenated_closures(n: usize) -> String {
    let path: Vec<String> = (1..=n).map(|i| format!("a{i}+")).collect();
    format!("?x,?y <- ?x {} ?y", path.join("/"))
}

pub fn all() -> impl Iterator<Item = &'static CorpusQuery> {
    YAGO.iter().chain(UNIPROT.iter())
}
