"""Regenerate the committed test fixtures.

Run from the repository root:

    python tools/make_fixtures.py

Deterministic: reruns produce byte-identical files. The canned teacher
bodies compute every answer with ordinary Python arithmetic here, so the
fixtures stay self-consistent (claimed outputs match what the embedded
code actually prints).
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"


def _factorial_digits(n: int, d: int) -> int:
    return len(str(math.factorial(n) // (math.factorial(d) * 2)))


# id, statement, chosen pattern, (chosen code, counter code), answer, reasonings
def _problem_specs():
    specs = []

    def add(pid, statement, pattern, chosen_code, counter_code, answer, chosen_why, counter_why):
        specs.append(
            {
                "id": pid,
                "statement": statement,
                "pattern": pattern,
                "chosen_code": chosen_code,
                "counter_code": counter_code,
                "answer": str(answer),
                "chosen_why": chosen_why,
                "counter_why": counter_why,
            }
        )

    sums = [(37, 703), (88, 3916), (129, 8385)]
    for i, (n, total) in enumerate(sums, start=1):
        add(
            f"fx{i:03d}",
            f"What is the sum of the first {n} positive integers?",
            "B",
            f"print({n} * {n + 1} // 2)",
            "total = 0\nfor k in range(1, {n} + 1):\n    total += k\nprint(total)".replace("{n}", str(n)),
            total,
            "The closed form n(n+1)/2 reduces the task to one multiplication, so a quick calculator check of that product settles it.",
            "Accumulating the integers one by one in a loop turns the question into a tiny program whose printed total is the answer.",
        )

    powers = [(7, 19), (3, 41), (12, 23)]
    for i, (base, exp) in enumerate(powers, start=4):
        value = base**exp
        add(
            f"fx{i:03d}",
            f"How many decimal digits does {base}^{exp} have?",
            "A",
            f"print(len(str({base} ** {exp})))",
            f"import math\nprint(math.floor({exp} * math.log10({base})) + 1)",
            len(str(value)),
            "Exact integer exponentiation followed by measuring the decimal representation avoids any rounding concerns, which is a small program's job.",
            "The digit count equals floor(e log10 b) plus one, so evaluating that logarithm as a calculator step is sufficient.",
        )

    gcds = [(3528, 3780, 252), (1071, 462, 21), (20412, 11340, 2268)]
    for i, (a, b, g) in enumerate(gcds, start=7):
        add(
            f"fx{i:03d}",
            f"Find the greatest common divisor of {a} and {b}.",
            "A",
            f"a, b = {a}, {b}\nwhile b:\n    a, b = b, a % b\nprint(a)",
            f"import math\nprint(math.gcd({a}, {b}))",
            g,
            "Running the Euclidean algorithm explicitly keeps every reduction step visible inside a compact program.",
            "A single library call returns the divisor, treating the interpreter as a calculator with a gcd button.",
        )

    primes = [(25, 97), (40, 173), (60, 281)]
    for i, (k, p) in enumerate(primes, start=10):
        add(
            f"fx{i:03d}",
            f"What is the {k}th prime number?",
            "A",
            (
                "def is_prime(m):\n"
                "    if m < 2:\n"
                "        return False\n"
                "    for d in range(2, int(m ** 0.5) + 1):\n"
                "        if m % d == 0:\n"
                "            return False\n"
                "    return True\n"
                "count, n = 0, 1\n"
                "while count < {k}:\n"
                "    n += 1\n"
                "    if is_prime(n):\n"
                "        count += 1\n"
                "print(n)"
            ).replace("{k}", str(k)),
            f"print([p for p in range(2, 400) if all(p % d for d in range(2, p))][{k} - 1])",
            p,
            "Scanning upward with a trial-division test makes the search for the target prime a complete, self-contained program.",
            "One throwaway expression that filters a small range and indexes into it works like a calculator query for the same value.",
        )

    mods = [(2, 1000, 1000000007, None), (3, 500, 998244353, None), (5, 300, 10**9 + 9, None)]
    for i, (base, exp, mod, _) in enumerate(mods, start=13):
        value = pow(base, exp, mod)
        add(
            f"fx{i:03d}",
            f"Compute {base}^{exp} modulo {mod}.",
            "B",
            f"print(pow({base}, {exp}, {mod}))",
            (
                "result = 1\n"
                "for _ in range({exp}):\n"
                "    result = result * {base} % {mod}\n"
                "print(result)"
            ).replace("{exp}", str(exp)).replace("{base}", str(base)).replace("{mod}", str(mod)),
            value,
            "Built-in modular exponentiation answers this in one calculator-style call without any looping on my part.",
            "Repeated multiplication under the modulus, written as an explicit loop, recomputes the power step by step as a program.",
        )

    fibs = [(30, 832040), (45, 1134903170), (50, 12586269025)]
    for i, (k, v) in enumerate(fibs, start=16):
        add(
            f"fx{i:03d}",
            f"What is the {k}th Fibonacci number, with F(1) = F(2) = 1?",
            "A",
            (
                "a, b = 1, 1\n"
                "for _ in range({k} - 2):\n"
                "    a, b = b, a + b\n"
                "print(b)"
            ).replace("{k}", str(k)),
            (
                "import math\n"
                "phi = (1 + math.sqrt(5)) / 2\n"
                "print(round(phi ** {k} / math.sqrt(5)))"
            ).replace("{k}", str(k)),
            v,
            "Iterating the recurrence keeps everything in exact integers, and the finished loop is a complete program for the sequence.",
            "Rounding the closed-form expression with the golden ratio is a single calculator evaluation that lands on the same integer.",
        )

    combos = [(52, 5, 2598960), (40, 8, 76904685)]
    for i, (n, k, v) in enumerate(combos, start=19):
        add(
            f"fx{i:03d}",
            f"How many ways are there to choose {k} items from {n} distinct items?",
            "B",
            f"import math\nprint(math.comb({n}, {k}))",
            (
                "n, k = {n}, {k}\n"
                "num = 1\n"
                "den = 1\n"
                "for j in range(1, k + 1):\n"
                "    num *= n - k + j\n"
                "    den *= j\n"
                "print(num // den)"
            ).replace("{n}", str(n)).replace("{k}", str(k)),
            v,
            "The binomial coefficient is one library call, so using the interpreter as a calculator for that call is the whole job.",
            "Building numerator and denominator factor by factor gives a full program that derives the count from first principles.",
        )

    assert len(specs) == 20, len(specs)
    return specs


def _teacher_body(spec) -> str:
    chosen = {
        "reasoning": spec["chosen_why"],
        "code_blocks": [spec["chosen_code"]],
        "outputs": [spec["answer"]],
        "final_answer": spec["answer"],
    }
    counter = {
        "reasoning": spec["counter_why"],
        "code_blocks": [spec["counter_code"]],
        "outputs": [spec["answer"]],
        "final_answer": spec["answer"],
    }
    body = {
        "problem": spec["statement"],
        "chosen_pattern": spec["pattern"],
        "chosen_solution": chosen,
        "counter_solution": counter,
    }
    return json.dumps(body, indent=2, ensure_ascii=False)


def make_server_fixtures():
    outdir = FIXTURES / "server"
    outdir.mkdir(parents=True, exist_ok=True)
    specs = _problem_specs()

    problems_path = outdir / "problems.jsonl"
    with open(problems_path, "w", encoding="utf-8") as fh:
        for spec in specs:
            fh.write(
                json.dumps(
                    {
                        "id": spec["id"],
                        "statement": spec["statement"],
                        "gold_answer": spec["answer"],
                        "source": "fixture",
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    for i, spec in enumerate(specs):
        body = _teacher_body(spec)
        # A few replies arrive fenced or wrapped in prose; the parser must cope.
        if i % 7 == 3:
            body = f"```json\n{body}\n```"
        elif i % 7 == 5:
            body = f"Here is the requested JSON.\n{body}\nDone."
        with open(outdir / f"{spec['id']}.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"id": spec["id"], "match_key": spec["statement"], "body": body, "fail_script": []},
                fh,
                indent=2,
                ensure_ascii=False,
            )
            fh.write("\n")
    print(f"wrote {len(specs)} server fixtures + problems.jsonl")


def make_parser_corpus():
    outdir = FIXTURES / "teacher"
    expdir = outdir / "expected"
    outdir.mkdir(parents=True, exist_ok=True)
    expdir.mkdir(parents=True, exist_ok=True)

    sys.path.insert(0, str(ROOT / "src"))
    from tirforge.parsing import extract_json_payload, parse_teacher_record
    from tirforge.schema import record_to_dict

    specs = _problem_specs()
    count_ok = 0
    for i, spec in enumerate(specs):
        body = _teacher_body(spec)
        style = ("pure", "fenced", "prose")[i % 3]
        if style == "fenced":
            text = f"```json\n{body}\n```"
        elif style == "prose":
            text = f"Sure, the structured solution follows.\n\n{body}\n\nHope that is clear."
        else:
            text = body
        name = f"ok_{i + 1:02d}_{style}"
        (outdir / f"{name}.txt").write_text(text, encoding="utf-8")
        record = parse_teacher_record(extract_json_payload(text), spec["id"])
        expected = {"problem_id": spec["id"], "record": record_to_dict(record)}
        (expdir / f"{name}.json").write_text(
            json.dumps(expected, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        count_ok += 1

    base = json.loads(_teacher_body(specs[0]))

    def write_bad(name: str, text: str, error: str, problem_id: str = "fx001"):
        (outdir / f"{name}.txt").write_text(text, encoding="utf-8")
        (expdir / f"{name}.json").write_text(
            json.dumps({"problem_id": problem_id, "error": error}, indent=2) + "\n",
            encoding="utf-8",
        )

    missing = dict(base)
    del missing["counter_solution"]
    write_bad("bad_01_missing_counter", json.dumps(missing, indent=2), "MissingKey")

    twoblocks = json.loads(json.dumps(base))
    twoblocks["chosen_solution"]["code_blocks"] = ["print(1)", "print(2)"]
    write_bad("bad_02_two_code_blocks", json.dumps(twoblocks, indent=2), "SchemaViolation")

    badpat = json.loads(json.dumps(base))
    badpat["chosen_pattern"] = "C"
    write_bad("bad_03_bad_pattern", json.dumps(badpat, indent=2), "BadPattern")

    write_bad("bad_04_no_json", "I could not produce the solution, sorry about that.", "NoJsonFound")

    dup = json.loads(json.dumps(base))
    dup["counter_solution"]["reasoning"] = dup["chosen_solution"]["reasoning"]
    write_bad("bad_05_duplicated_reasoning", json.dumps(dup, indent=2), "SchemaViolation")

    empty = json.loads(json.dumps(base))
    empty["chosen_solution"]["code_blocks"] = [""]
    write_bad("bad_06_empty_code", json.dumps(empty, indent=2), "SchemaViolation")

    nokey = json.loads(json.dumps(base))
    del nokey["chosen_solution"]["final_answer"]
    write_bad("bad_07_missing_answer_key", json.dumps(nokey, indent=2), "MissingKey")

    print(f"wrote {count_ok} ok + 7 malformed parser fixtures")


def make_agreement_fixtures():
    outdir = FIXTURES / "agreement"
    outdir.mkdir(parents=True, exist_ok=True)
    # 100 labels, disagreeing at positions 17 and 71: a 98% agreement rate.
    pattern_a = ["A" if i % 3 else "B" for i in range(100)]
    pattern_b = list(pattern_a)
    for idx in (17, 71):
        pattern_b[idx] = "A" if pattern_b[idx] == "B" else "B"
    for name, labels in (("a", pattern_a), ("b", pattern_b)):
        with open(outdir / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for i, label in enumerate(labels):
                fh.write(json.dumps({"id": f"case{i:03d}", "pattern": label}) + "\n")
    print("wrote agreement fixtures (98/100 matches)")


def make_judge_fixtures():
    outdir = FIXTURES / "judge"
    outdir.mkdir(parents=True, exist_ok=True)
    cases = [
        {"reply": "A", "expected": "A"},
        {"reply": "B", "expected": "B"},
        {"reply": "Pattern B is more appropriate.", "expected": "B"},
        {"reply": "Pattern A.", "expected": "A"},
        {"reply": "I would go with pattern B here because the arithmetic is trivial.", "expected": "B"},
        {"reply": "The better choice is A, treating it as a full coding problem.", "expected": "A"},
        {"reply": "pattern: A", "expected": "A"},
        {"reply": "Definitely B.", "expected": "B"},
        {"reply": "Either could work, but Pattern A wins for this search-heavy task.", "expected": "A"},
        {"reply": "B, since one multiplication settles it.", "expected": "B"},
        {"reply": "maybe", "expected": None},
        {"reply": "It depends on the problem.", "expected": None},
    ]
    with open(outdir / "cases.jsonl", "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case, ensure_ascii=False) + "\n")
    print(f"wrote {len(cases)} judge fixtures")


if __name__ == "__main__":
    make_server_fixtures()
    make_parser_corpus()
    make_agreement_fixtures()
    make_judge_fixtures()
