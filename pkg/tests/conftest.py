import pytest

from confuse.gateway import Gateway, ScriptedBackend
from confuse.model import Case, Dataset, Document, Split, UncertaintySource


def make_doc(doc_id, body, title="", is_gold=False):
    return Document(doc_id=doc_id, title=title, body=body, is_gold=is_gold)


def make_case(case_id="c1", dataset=Dataset.HOTPOTQA,
              original_query="Are Edward F. Cline and Floyd Mutrux both screenwriters?",
              actual_query=None, gold_docs=None, actual_docs=None,
              clarification=None, gold_answer="yes", gold_inquiry=None,
              label=None, split=Split.BENCHMARK):
    gold_docs = gold_docs if gold_docs is not None else [
        make_doc("d1", "Edward F. Cline is a screenwriter.", is_gold=True),
        make_doc("d2", "Floyd Mutrux is a screenwriter.", is_gold=True),
    ]
    actual_docs = actual_docs if actual_docs is not None else gold_docs
    return Case(
        id=case_id, dataset=dataset, original_query=original_query,
        actual_query=actual_query or original_query,
        gold_documents=tuple(gold_docs), actual_documents=tuple(actual_docs),
        clarification=clarification, gold_answer=gold_answer,
        gold_inquiry=gold_inquiry, label=label, split=split,
    )


def yoga_case(case_id="yoga"):
    """Ambiguity fixture: the city was obscured out of the query."""
    docs = [make_doc("y1", "Yoga classes in New York run daily in Central Park.",
                     is_gold=True)]
    return make_case(
        case_id=case_id, dataset=Dataset.AMBIGQA,
        original_query="locate the best yoga class in New York",
        actual_query="locate the best yoga class in my city",
        gold_docs=docs, actual_docs=docs,
        clarification="the city is New York",
        gold_answer="the Central Park yoga class",
        label=UncertaintySource.AMBIGUITY,
    )


def mutrux_case(case_id="mutrux"):
    """Document-scarcity fixture: one gold document was dropped."""
    gold = [
        make_doc("m1", "Edward F. Cline is a screenwriter.", is_gold=True),
        make_doc("m2", "Floyd Mutrux is a screenwriter.", is_gold=True),
    ]
    return make_case(
        case_id=case_id, dataset=Dataset.HOTPOTQA,
        gold_docs=gold, actual_docs=gold[:1],
        gold_answer="yes", label=UncertaintySource.DOCUMENT,
    )


def rule_gateway(rules):
    backend = ScriptedBackend.from_rules(rules)
    return Gateway(backend), backend


def synthetic_bench():
    """Twelve labeled cases, four per source, across the two QA datasets.

    Every query carries a unique token so scripted rules can address each
    case inside any prompt.
    """
    cases = [mutrux_case(), yoga_case()]
    for i in range(3):
        gold = [make_doc(f"dg{i}a", f"Author alphax{i} wrote book betax{i}.",
                         is_gold=True),
                make_doc(f"dg{i}b", f"Book betax{i} sold a million copies.",
                         is_gold=True)]
        cases.append(make_case(
            case_id=f"doc{i}", dataset=Dataset.HOTPOTQA,
            original_query=f"Did author alphax{i} write book betax{i}?",
            gold_docs=gold, actual_docs=gold[:1], gold_answer="yes",
            label=UncertaintySource.DOCUMENT))
    for i in range(3):
        doc = make_doc(f"ag{i}", f"Festival gammax{i} happens each spring.",
                       is_gold=True)
        cases.append(make_case(
            case_id=f"amb{i}", dataset=Dataset.AMBIGQA,
            original_query=f"When does festival gammax{i} happen in Austin?",
            actual_query=f"When does festival gammax{i} happen in my town?",
            gold_docs=[doc], actual_docs=[doc],
            clarification="the town is Austin", gold_answer="each spring",
            label=UncertaintySource.AMBIGUITY))
    for i in range(4):
        ds = Dataset.HOTPOTQA if i % 2 == 0 else Dataset.AMBIGQA
        doc = make_doc(f"cg{i}", f"Counting deltax{i} items needs care.",
                       is_gold=True)
        cases.append(make_case(
            case_id=f"cap{i}", dataset=ds,
            original_query=f"How many deltax{i} items are there in total?",
            gold_docs=[doc], actual_docs=[doc], gold_answer="seven",
            label=UncertaintySource.CAPABILITY))
    return cases


def synthetic_bench_rules():
    """Scripted rules that judge every synthetic case correctly and answer
    every query with the accepted answer. Single-response rules only, so a
    rerun is byte-identical."""
    letters = {"Mutrux": "A", "yoga": "B"}
    for i in range(3):
        letters[f"betax{i}"] = "A"
        letters[f"gammax{i}"] = "B"
    for i in range(4):
        letters[f"deltax{i}"] = "C"
    rules = [(f"{token}.*three kinds of actions", letter)
             for token, letter in letters.items()]
    rules += [
        ("gather further document information", "book screenwriter facts"),
        ("get a clarification to answer the question", "Which one do you mean?"),
        ("Original Intention:", "the missing detail"),
        ("reasoning steps", "a carefully reasoned answer"),
        ("Inquiry History:", "the accepted final answer"),
        (r"\"correct\"", '{"correct": "yes"}'),
    ]
    return rules


def write_eval_fixture(tmp_path):
    """Materialize the synthetic benchmark, its index and a scripted
    config; returns (bench_path, config_path, index_path)."""
    import json as _json

    from confuse.model import write_cases
    from confuse.retrieval import ingest, save_index

    cases = synthetic_bench()
    bench_path = tmp_path / "bench.jsonl"
    write_cases(bench_path, cases)

    docs, seen = [], set()
    for case in cases:
        for doc in case.gold_documents:
            if doc.doc_id not in seen:
                seen.add(doc.doc_id)
                docs.append(doc)
    index_path = tmp_path / "corpus.idx"
    save_index(ingest(docs), index_path)

    config_path = tmp_path / "config.json"
    config_path.write_text(_json.dumps({
        "seed": 7,
        "models": {
            "evaluated": "eval-model", "strong": "strong-model",
            "judge": "judge-model", "user_sim": "user-model",
            "generators": ["gen-a", "gen-b"],
        },
        "strategy": {"repeats": 1},
        "backend": {"kind": "scripted",
                    "rules": synthetic_bench_rules()},
    }))
    return bench_path, config_path, index_path


# discriminating substrings for each prompt template, for rule matching
JUDGE_SOURCE_PAT = r"three kinds of actions"
GENERATE_INQUIRY_PAT = r"generate your answer in json"
ANSWER_INQUIRY_PAT = r"Possible Answers:"
ANSWER_COT_PAT = r"reasoning steps"
ANSWER_PAT = r"Inquiry History:"
USER_SIM_PAT = r"Original Intention:"
CORRECT_PAT = r"\"correct\""
USEFUL_PAT = r"\"usefulness\""
EQUIV_PAT = r"\"equivalent\""
COHERENT_PAT = r"\"coherent\""
BETTER_PAT = r"\"better\""
GOLD_INQUIRY_PAT = r"recognize those missing information"
EVAL_INQUIRY_PAT = r"quality of inquiry"
OBSCURITY_PAT = r"is the obscurity successful"
AMR_GEN_PAT = r"PENMAN-style"
AMBIGUATE_PAT = r"manipulate the AMR"
RETRIEVAL_INQ_PAT = r"gather further document information"
CLARIFY_INQ_PAT = r"get a clarification to answer the question"
