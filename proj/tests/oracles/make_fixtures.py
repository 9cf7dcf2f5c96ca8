#!/usr/bin/env python3
# Copyright 2026 The cob Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reference implementations used to freeze the metric and parsing fixtures.

These are written separately from the C++ code (regular expressions,
Python's datetime, memoized recursion) and produce the JSON files under
tests/data/oracle/. The C++ tests load those files and must agree exactly.

  make_fixtures.py           rewrite the fixtures
  make_fixtures.py --check   exit 1 if the committed fixtures are stale
"""

import datetime
import functools
import json
import os
import re
import string
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "data", "oracle")

WS = "[ \t\n\r\f\v]"


# --- text normalization ------------------------------------------------------

def ascii_lower(s):
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in s)


def normalize(s):
    toks = re.split(WS + "+", ascii_lower(s))
    out = []
    for t in toks:
        t = t.strip(string.punctuation)
        if t:
            out.append(t)
    return " ".join(out)


def ascii_trim(s):
    return s.strip(" \t\n\r\f\v")


# --- edit distance and ANLS --------------------------------------------------

def lev(a, b):
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1,
                   d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def anls(pred, golds, tau=0.5):
    best = 0.0
    p = ascii_lower(ascii_trim(pred))
    for g in golds:
        g = ascii_lower(ascii_trim(g))
        denom = max(len(p), len(g))
        nl = 0.0 if denom == 0 else lev(p, g) / denom
        if nl < tau:
            best = max(best, 1.0 - nl)
    return best


ANLS_CASES = [
    ("kitten", ["sitting"]),
    ("abc", ["xyz"]),
    ("4821", ["4821"]),
    ("  Dover ", ["dover"]),
    ("DOVER", ["dover"]),
    ("abcd", ["abxy"]),
    ("abcde", ["abxye"]),
    ("", ["answer"]),
    ("", [""]),
    ("1200", ["$1,200.00", "1200"]),
    ("Elena Park", ["Dr. Elena Park"]),
    ("café", ["cafe"]),
    ("12 percent", ["12%", "twelve percent"]),
    ("B-204", ["B204"]),
    ("Springfeld", ["Springfield"]),
    ("Jan 5, 2020", ["2020-01-05"]),
    ("red", ["green", "reed", "bred"]),
    ("lab safety", ["Lab Safety Review"]),
    ("x", ["y", "x"]),
    ("invoice", ["in voice"]),
]


# --- box id parsing ----------------------------------------------------------

TAG = re.compile(r"<box>" + WS + r"*([0-9]+)" + WS + r"*</box>", re.I)
PHRASE = re.compile(
    r"(?<![A-Za-z0-9])box(?:es|s)?(?![A-Za-z])" + WS + r"*(?:ids?(?![A-Za-z])"
    + WS + r"*)?[#:]?" + WS + r"*([0-9]+)", re.I)
CONT = re.compile(
    WS + r"*(?:," + WS + r"*(?:(?:and|or)(?![A-Za-z])" + WS + r"*)?|[&/]" + WS
    + r"*|(?:and|or)(?![A-Za-z])" + WS + r"*)#?([0-9]+)", re.I)


def phrase_ids(s):
    out = []
    pos = 0
    while True:
        m = PHRASE.search(s, pos)
        if not m:
            return out
        out.append(m.group(1))
        pos = m.end()
        while True:
            c = CONT.match(s, pos)
            if not c:
                break
            out.append(c.group(1))
            pos = c.end()


def parse_box_ids(raw, n, k_max=8):
    toks = [m.group(1) for m in TAG.finditer(raw)]
    if not toks:
        toks = phrase_ids(raw)
    if not toks:
        toks = re.findall(r"[0-9]+", raw)
    ids = []
    for t in toks:
        v = int(t)
        if v < 1 or v > n or v in ids:
            continue
        ids.append(v)
    return ids[:k_max]


BOX_CASES = [
    ("<box>3</box>", 10, 8),
    ("<box>3</box>, <box>5</box>", 10, 8),
    ("<BOX> 7 </BOX>", 10, 8),
    ("<box>3</box> and box 4", 10, 8),
    ("Box 6", 10, 8),
    ("box 6", 10, 8),
    ("Box #5", 10, 8),
    ("Box ID: 2", 10, 8),
    ("box id 9", 10, 8),
    ("Boxes 3, 5 and 6", 10, 8),
    ("boxes 2/4 or 7", 10, 8),
    ("boxes 1 & 2", 10, 8),
    ("Boxes 3, and 8", 10, 8),
    ("The answer is in box 4.", 10, 8),
    ("box 3 and box 5", 10, 8),
    ("Box 2, then box 9", 10, 8),
    ("4", 10, 8),
    ("3 5 7", 10, 8),
    ("I think 12 boxes, maybe 3", 10, 8),
    ("I cannot tell.", 10, 8),
    ("", 10, 8),
    ("<box>99</box>", 10, 8),
    ("<box>0</box>", 10, 8),
    ("<box>3</box><box>3</box>", 10, 8),
    ("box 3, 3, 4", 10, 8),
    ("boxes 1,2,3,4,5,6,7,8,9,10", 10, 8),
    ("boxes 1,2,3,4,5,6,7,8,9,10", 10, 3),
    ("boxing day 5", 10, 8),
    ("inbox 4", 10, 8),
    ("Box: 7", 10, 8),
    ("boxes: 2 or 3", 10, 8),
    ("box\t8", 10, 8),
    ("Boxes 2 and 3", 5, 8),
    ("<box>2</box> box 5", 5, 8),
    ("box 12345678901234", 10, 8),
    ("99999999999", 10, 8),
    ("box 007", 10, 8),
    ("box abc 4", 10, 8),
    ("Boxes #2, #4", 10, 8),
    ("box 3 or", 10, 8),
    ("box 3,", 10, 8),
    ("BOXES 6 AND 7", 10, 8),
    ("box 2 andy 4", 10, 8),
    ("<box>x</box> 6", 10, 8),
    ("<box>11</box>, <box>2</box>", 10, 8),
    ("box 1 box 1 box 2", 10, 8),
    ("toolbox 3", 10, 8),
    ("box-4", 10, 8),
    ("Box IDs 5 and 6", 10, 8),
    ("See boxes 4 & 5 / 6", 6, 8),
]


# --- typed field matching ----------------------------------------------------

MONTHS = ["january", "february", "march", "april", "may", "june", "july",
          "august", "september", "october", "november", "december"]


def month_num(name):
    n = ascii_lower(name).rstrip(".") if name.endswith(".") else ascii_lower(name)
    if len(n) < 3:
        return None
    for i, m in enumerate(MONTHS):
        if n == m or n == m[:3] or (i == 8 and n == "sept"):
            return i + 1
    return None


def mkdate(y, m, d):
    try:
        return datetime.date(y, m, d)
    except ValueError:
        return None


def parse_date(s, order):
    s = ascii_trim(s)
    m = re.fullmatch(r"([0-9]{4})-([0-9]{2})-([0-9]{2})", s)
    if m:
        return mkdate(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    if "-" in s[4:5] and len(s) == 10:
        return None
    m = re.fullmatch(r"([0-9]{1,2})/([0-9]{1,2})/([0-9]{4})", s)
    if m:
        a, b, y = int(m.group(1)), int(m.group(2)), int(m.group(3))
        return mkdate(y, a, b) if order == "mdy" else mkdate(y, b, a)
    if "/" in s:
        return None
    toks = re.split(WS + "+", s.replace(",", " ").strip(" \t\n\r\f\v"))
    if len(toks) != 3 or not re.fullmatch(r"[0-9]{4}", toks[2]):
        return None

    def day(t):
        t2 = re.sub(r"(?i)(st|nd|rd|th)$", "", t) if len(t) > 2 else t
        return int(t2) if re.fullmatch(r"[0-9]{1,2}", t2) else None

    mo = month_num(toks[0])
    if mo:
        d = day(toks[1])
        return mkdate(int(toks[2]), mo, d) if d is not None else None
    mo = month_num(toks[1])
    if mo:
        d = day(toks[0])
        return mkdate(int(toks[2]), mo, d) if d is not None else None
    return None


def parse_amount(s):
    s = ascii_trim(s)
    for sym in ("$", "€", "£", "¥"):
        s = s.replace(sym, "")
    s = ascii_trim(s)
    m = re.fullmatch(r"([A-Za-z]*)(.*?)([A-Za-z]*)", s, re.S)
    lead, mid, trail = m.group(1), m.group(2), m.group(3)
    if len(lead) > 3 or len(trail) > 3:
        return None
    mid = ascii_trim(mid).replace(",", "").replace(" ", "")
    if not re.fullmatch(r"[+-]?(?=[0-9.]*[0-9])[0-9]*\.?[0-9]*", mid):
        return None
    return float(mid)


def typed_match(pred, gold, typ, order="mdy"):
    if normalize(pred) == normalize(gold):
        return True
    if typ in ("numeric", "price"):
        a, b = parse_amount(pred), parse_amount(gold)
        return a is not None and b is not None and abs(a - b) <= 1e-6 * max(abs(a), abs(b))
    if typ == "date":
        a, b = parse_date(pred, order), parse_date(gold, order)
        return a is not None and b is not None and a == b
    return False


TYPED_CASES = [
    ("$1,200.00", "1200", "price", "mdy"),
    ("1,200", "1200.0", "numeric", "mdy"),
    ("USD 45.10", "$45.1", "price", "mdy"),
    ("RM 12.50", "12.5", "price", "mdy"),
    ("€3,000", "3000", "price", "mdy"),
    ("£1,000,000.00", "1000000", "price", "mdy"),
    ("1200", "1201", "price", "mdy"),
    ("12.5", "12.50000001", "numeric", "mdy"),
    ("12.5", "12.6", "numeric", "mdy"),
    ("-3.5", "-3.50", "numeric", "mdy"),
    ("N/A", "0", "numeric", "mdy"),
    ("Jan 5, 2020", "2020-01-05", "date", "mdy"),
    ("January 5, 2020", "01/05/2020", "date", "mdy"),
    ("5 January 2020", "2020-01-05", "date", "mdy"),
    ("05/01/2020", "2020-01-05", "date", "dmy"),
    ("05/01/2020", "2020-01-05", "date", "mdy"),
    ("Sept. 30, 2021", "2021-09-30", "date", "mdy"),
    ("31 Dec 1999", "12/31/1999", "date", "mdy"),
    ("2020-02-30", "2020-03-01", "date", "mdy"),
    ("Feb 29, 2021", "2021-03-01", "date", "mdy"),
    ("soon", "2020-01-05", "date", "mdy"),
    ("ACME Corp", "ACME Corp.", "string", "mdy"),
    ("acme corp", "ACME CORP", "string", "mdy"),
    ("  31  Palmer   Drive ", "31 Palmer Drive", "string", "mdy"),
    ("ACME Inc", "ACME Corp", "string", "mdy"),
    ("\"Dover\"", "dover", "string", "mdy"),
    ("B-204", "B204", "string", "mdy"),
    ("1200", "$1,200.00", "string", "mdy"),
    ("March 3rd, 2019", "2019-03-03", "date", "mdy"),
    ("12/13/2019", "2019-12-13", "date", "dmy"),
]

NORMALIZE_CASES = [
    "Address: 31 Palmer Drive, Dover",
    "  ACME   Corp. ",
    "(555) 010-2020",
    "...",
    "Dr. Elena Park",
    "\"quoted\" text!",
    "café CRÈME",
    "a\tb\nc",
    "--x--",
    "",
]


def build():
    anls_out = [{"pred": p, "golds": g, "score": anls(p, g)} for p, g in ANLS_CASES]
    box_out = [{"raw": r, "n": n, "k_max": k, "ids": parse_box_ids(r, n, k)}
               for r, n, k in BOX_CASES]
    typed_out = [{"pred": p, "gold": g, "type": t, "date_order": o,
                  "match": typed_match(p, g, t, o)} for p, g, t, o in TYPED_CASES]
    norm_out = [{"input": s, "normalized": normalize(s)} for s in NORMALIZE_CASES]
    return {
        "anls_cases.json": anls_out,
        "box_id_cases.json": box_out,
        "typed_match_cases.json": typed_out,
        "normalize_cases.json": norm_out,
    }


def dump(obj):
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def main():
    check = "--check" in sys.argv
    os.makedirs(FIXTURES, exist_ok=True)
    stale = []
    for name, obj in build().items():
        path = os.path.join(FIXTURES, name)
        text = dump(obj)
        if check:
            try:
                with open(path, encoding="utf-8") as fh:
                    if fh.read() != text:
                        stale.append(name)
            except FileNotFoundError:
                stale.append(name)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
    if stale:
        print("stale fixtures: " + ", ".join(stale))
        return 1
    print("fixtures ok" if check else "fixtures written")
    return 0


if __name__ == "__main__":
    sys.exit(main())
