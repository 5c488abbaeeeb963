#!/usr/bin/env python3
"""Writes the three-project pipeline fixture and its expected population counts.

The generator records every real mention it places in a comment body, so the
expected counts come from that record, not from parsing the bodies. Bodies
also carry decoys (code spans, quoted lines, team handles, e-mail addresses)
that a correct extractor must ignore.

Usage: python3 generate_pipeline_fixture.py [OUT_DIR]
"""

import hashlib
import json
import random
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

START = datetime(2018, 1, 1, tzinfo=timezone.utc)
DAYS = 3 * 365
MODULES = ["core", "net", "ui", "docs"]
PROJECTS = [("acme", "widgets", 11), ("acme", "gadgets", 23), ("blue", "sprockets", 37)]


def ts(seconds):
    return (START + timedelta(seconds=seconds)).strftime("%Y-%m-%dT%H:%M:%SZ")


def sha(project, i):
    return hashlib.sha1(f"{project}:{i}".encode()).hexdigest()


class Project:
    def __init__(self, owner, name, seed, n_devs=60, n_threads=420):
        self.owner, self.name = owner, name
        self.full = f"{owner}/{name}"
        self.rng = random.Random(seed)
        r = self.rng
        # the owner is developer 0
        self.devs = [owner] + [f"{name[:3]}dev{i}" for i in range(1, n_devs)]
        # latent visibility drives both commits and incoming mentions
        self.pop = [r.lognormvariate(0.0, 1.0) for _ in self.devs]
        self.pop[0] *= 3.0
        self.home = [r.randrange(len(MODULES)) for _ in self.devs]
        self.responsive = [r.random() for _ in self.devs]
        self.n_threads = n_threads
        self.threads = []
        self.commits = []
        # real mentions as (thread, event index, mentioner, mentionee)
        self.mentions = []

    def pick(self, weights=None):
        return self.rng.choices(range(len(self.devs)), weights=weights or self.pop)[0]

    def body(self, targets, self_mention):
        r = self.rng
        parts = [f"note {r.randrange(10**6)}"]
        for t in targets:
            login = self.devs[t]
            # case and a leading punctuation mark do not change the login
            if r.random() < 0.2:
                login = login.upper()
            lead = r.choice(["", "(", "cc "])
            parts.append(f"{lead}@{login}{')' if lead == '(' else ''}")
        if self_mention is not None:
            parts.append(f"@{self.devs[self_mention]}")
        decoy = self.devs[self.pick()]
        roll = r.random()
        if roll < 0.15:
            parts.append(f"`@{decoy}`")
        elif roll < 0.25:
            parts.append(f"\n> @{decoy} said this earlier\n")
        elif roll < 0.35:
            parts.append(f"@{self.owner}/maintainers")
        elif roll < 0.45:
            parts.append(f"mail {decoy}@example.com")
        elif roll < 0.50:
            parts.append(f"\n```\nping @{decoy}\n```\n")
        return " ".join(parts)

    def make_threads(self):
        r = self.rng
        for number in range(1, self.n_threads + 1):
            kind = "pull_request" if r.random() < 0.3 else "issue"
            created = r.randrange(0, DAYS * 86400 - 3 * 86400)
            author = self.pick()
            events = []
            t = created
            n_comments = r.choice([0, 1, 1, 2, 2, 3, 4])
            pending = []  # callees who may answer
            for k in range(n_comments + 1):
                if k == 0:
                    who = author
                elif pending and r.random() < self.responsive[pending[0]]:
                    who = pending.pop(0)
                else:
                    who = self.pick()
                if k > 0:
                    t += r.randrange(600, 5 * 86400)
                if t >= DAYS * 86400:
                    break
                n_m = r.choices([0, 1, 2], weights=[0.45, 0.4, 0.15])[0]
                targets = []
                for _ in range(n_m):
                    m = self.pick()
                    if m != who:
                        targets.append(m)
                self_mention = who if r.random() < 0.05 else None
                events.append({"author": self.devs[who], "timestamp": ts(t), "body": self.body(targets, self_mention)})
                for m in targets:
                    self.mentions.append((number, len(events) - 1, who, m))
                    pending.append(m)
                t += 1
            self.threads.append(
                {
                    "project": {"owner": self.owner, "name": self.name},
                    "number": number,
                    "kind": kind,
                    "created_at": ts(created),
                    "author": self.devs[author],
                    "events": events,
                    "title": f"{kind} {number}",
                    "merge_commits": [],
                }
            )

    def make_commits(self):
        r = self.rng
        plan = []
        for d in range(len(self.devs)):
            # two early commits at least four months apart inside the observation window
            a = r.randrange(0, 300 * 86400)
            plan.append((a, d))
            plan.append((a + r.randrange(130 * 86400, 400 * 86400), d))
            extra = min(int(self.pop[d] * 4), 40)
            for _ in range(extra):
                plan.append((r.randrange(0, DAYS * 86400), d))
        plan.sort()
        files = {}
        issues = [t for t in self.threads if t["kind"] == "issue"]
        last = -1
        for i, (t, d) in enumerate(plan):
            # strictly increasing along the chain
            t = last = max(t, last + 1)
            mod = MODULES[self.home[d]] if r.random() < 0.7 else r.choice(MODULES)
            path = f"{mod}/f{r.randrange(3)}.txt"
            lines = files.setdefault(path, [])
            stamp = ts(t)
            closable = [x["number"] for x in issues if x["created_at"] < stamp]
            fix = bool(lines) and closable and r.random() < 0.25
            if lines and (fix or r.random() < 0.5):
                pos = r.randrange(len(lines))
                n = min(r.randrange(1, 3), len(lines) - pos)
                old = lines[pos : pos + n]
                new = [f"{path} v{i}.{k}" for k in range(n)]
                lines[pos : pos + n] = new
                hunk = {"old_start": pos + 1, "deleted": old, "new_start": pos + 1, "added": new}
            else:
                pos = r.randrange(len(lines) + 1)
                new = [f"{path} v{i}.{k}" for k in range(r.randrange(1, 4))]
                lines[pos:pos] = new
                hunk = {"old_start": pos + 1, "deleted": [], "new_start": pos + 1, "added": new}
            message = f"Fixes #{r.choice(closable)}" if fix else f"update {path}"
            self.commits.append(
                {
                    "sha": sha(self.full, i),
                    "author_login": self.devs[d],
                    "author_date": stamp,
                    "message": message,
                    "parents": [sha(self.full, i - 1)] if i else [],
                    "file_changes": [{"path": path, "hunks": [hunk]}],
                }
            )

    def developers(self):
        r = self.rng
        return [
            {"login": d, "github_created_at": ts(-r.randrange(30, 3000) * 86400)}
            for d in self.devs
        ]

    def expected(self):
        """Population counts from the recorded mentions."""
        by_thread = {}
        for m in self.mentions:
            by_thread.setdefault(m[0], []).append(m)
        s = dict(issues=0, issues_with_mention=0, pull_requests=0, pull_requests_with_mention=0,
                 mentions=0, calls=0, answered_calls=0, calls_to_responders=0)
        calls = []
        for t in self.threads:
            ms = by_thread.get(t["number"], [])
            key = "issues" if t["kind"] == "issue" else "pull_requests"
            s[key] += 1
            s[key + "_with_mention"] += int(bool(ms))
            s["mentions"] += len(ms)
            ev = t["events"]
            for _, idx, _who, callee in ms:
                at = ev[idx]["timestamp"]
                login = self.devs[callee]
                posted = (t["author"] == login and t["created_at"] < at) or any(
                    e["author"] == login and e["timestamp"] < at for e in ev
                )
                if posted:
                    continue
                answered = any(e["author"] == login and e["timestamp"] > at for e in ev)
                calls.append((login, answered))
        responders = {c for c, a in calls if a}
        s["calls"] = len(calls)
        s["answered_calls"] = sum(a for _, a in calls)
        s["calls_to_responders"] = sum(c in responders for c, _ in calls)
        s["project"] = self.full
        return s


def write_jsonl(path, records):
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "pipeline"
    expected = []
    for owner, name, seed in PROJECTS:
        p = Project(owner, name, seed)
        p.make_threads()
        p.make_commits()
        d = out / f"{owner}__{name}"
        d.mkdir(parents=True, exist_ok=True)
        write_jsonl(d / "threads.jsonl", p.threads)
        write_jsonl(d / "commits.jsonl", p.commits)
        write_jsonl(d / "developers.jsonl", p.developers())
        expected.append(p.expected())
    with open(out / "expected_population.json", "w") as f:
        json.dump(expected, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
