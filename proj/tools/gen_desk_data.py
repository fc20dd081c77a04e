#!/usr/bin/env python3
"""Generates the desk-scale dataset under data/desk.

Outputs sql/<db>.sql, dev.json and fixtures.jsonl. Everything is derived from
fixed seeds, so rerunning reproduces the checked-in files byte for byte.
"""
import argparse
import hashlib
import json
import random
from pathlib import Path

COUNTIES = ["Alameda", "Fresno", "Los Angeles", "Marin", "Sacramento", "San Diego"]
ADJ = ["Oak", "River", "Hill", "Lake", "Sun", "Pine", "Cedar", "Valley", "Mesa", "Bay"]
NOUN = ["Grove", "Park", "View", "Ridge", "Crest", "Point", "Meadow", "Creek"]
KIND = ["Elementary", "Middle", "High", "Academy", "Charter"]

DRIVERS = [
    ("Lewis", "Hamilton", "British", "1985-01-07"),
    ("Sebastian", "Vettel", "German", "1987-07-03"),
    ("Fernando", "Alonso", "Spanish", "1981-07-29"),
    ("Jenson", "Button", "British", "1980-01-19"),
    ("Mark", "Webber", "Australian", "1976-08-27"),
    ("Nico", "Rosberg", "German", "1985-06-27"),
    ("Felipe", "Massa", "Brazilian", "1981-04-25"),
    ("Kimi", "Raikkonen", "Finnish", "1979-10-17"),
    ("Robert", "Kubica", "Polish", "1984-12-07"),
    ("Michael", "Schumacher", "German", "1969-01-03"),
    ("Rubens", "Barrichello", "Brazilian", "1972-05-23"),
    ("Heikki", "Kovalainen", "Finnish", "1981-10-19"),
    ("Nico", "Hulkenberg", "German", "1987-08-19"),
    ("Paul", "di Resta", "British", "1986-04-16"),
    ("Sergio", "Perez", "Mexican", "1990-01-26"),
    ("Kamui", "Kobayashi", "Japanese", "1986-09-13"),
    ("Adrian", "Sutil", "German", "1983-01-11"),
    ("Vitaly", "Petrov", "Russian", "1984-09-08"),
    ("Pastor", "Maldonado", "Venezuelan", "1985-03-09"),
    ("Jaime", "Alguersuari", "Spanish", "1990-03-23"),
    ("Sebastien", "Buemi", "Swiss", "1988-10-31"),
    ("Timo", "Glock", "German", "1982-03-18"),
    ("Jarno", "Trulli", "Italian", "1974-07-13"),
    ("Giancarlo", "Fisichella", "Italian", "1973-01-14"),
]
GRAND_PRIX = ["Australian", "Malaysian", "Chinese", "Bahrain", "Spanish",
              "Monaco", "Turkish", "British", "German", "Italian"]
POINTS = [25, 18, 15, 12, 10, 8, 6, 4, 2, 1]


def q(v):
    if v is None:
        return "NULL"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


def inserts(table, rows):
    return "".join(f"INSERT INTO {table} VALUES ({', '.join(q(v) for v in r)});\n" for r in rows)


def school_district():
    rng = random.Random(20240611)
    schools, frpm, sat = [], [], []
    names = set()
    for i in range(60):
        while True:
            name = f"{rng.choice(ADJ)} {rng.choice(NOUN)} {rng.choice(KIND)}"
            if name not in names:
                names.add(name)
                break
        cds = f"{1611190000000 + i * 7919:014d}"
        county = COUNTIES[i % len(COUNTIES)] if i < 12 else rng.choice(COUNTIES)
        charter = 1 if name.endswith("Charter") or rng.random() < 0.15 else 0
        year = rng.randint(1955, 2015)
        schools.append((cds, name, county, f"{county} Unified", charter,
                        f"{year}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"))
        if i % 11 != 5:
            enroll = rng.randint(120, 3200)
            free = float(int(enroll * rng.uniform(0.05, 0.95)))
            frpm.append((cds, enroll, free, round(free / enroll, 4)))
        if i % 7 != 3:
            takers = rng.randint(0, 600)
            if takers < 15:
                sat.append((cds, takers, None, None, None, 0))
            else:
                m, r, w = (rng.randint(380, 640) for _ in range(3))
                ge = int(takers * max(0.0, min(1.0, (m + r + w - 1200) / 900)))
                sat.append((cds, takers, m, r, w, ge))
    ddl = """CREATE TABLE schools (
  CDSCode TEXT NOT NULL PRIMARY KEY,
  School TEXT,
  County TEXT NOT NULL,
  District TEXT,
  Charter INTEGER,
  OpenDate DATE
);
CREATE TABLE frpm (
  CDSCode TEXT NOT NULL PRIMARY KEY REFERENCES schools (CDSCode),
  Enrollment INTEGER,
  FreeMealCount REAL,
  PercentEligibleFree REAL
);
CREATE TABLE satscores (
  cds TEXT NOT NULL PRIMARY KEY REFERENCES schools (CDSCode),
  NumTstTakr INTEGER NOT NULL,
  AvgScrMath INTEGER,
  AvgScrRead INTEGER,
  AvgScrWrite INTEGER,
  NumGE1500 INTEGER
);
"""
    return ddl + inserts("schools", schools) + inserts("frpm", frpm) + inserts("satscores", sat)


def motor_racing():
    rng = random.Random(1950)
    drivers = [(i + 1, *d) for i, d in enumerate(DRIVERS)]
    races, results = [], []
    race_id = 0
    result_id = 0
    for year in range(2008, 2012):
        for rnd, gp in enumerate(GRAND_PRIX, start=1):
            race_id += 1
            races.append((race_id, year, rnd, f"{gp} Grand Prix",
                          f"{year}-{2 + rnd:02d}-{rng.randint(1, 28):02d}"))
            field = rng.sample(range(1, len(DRIVERS) + 1), 14)
            # strong drivers tend to finish near the front
            field.sort(key=lambda d: d + rng.uniform(-6, 6))
            base_ms = rng.randint(5_200_000, 5_900_000)
            finishers = 14 - rng.randint(1, 4)
            for pos, driver in enumerate(field, start=1):
                result_id += 1
                if pos <= finishers:
                    results.append((result_id, race_id, driver, pos,
                                    float(POINTS[pos - 1]) if pos <= 10 else 0.0,
                                    58, base_ms + pos * rng.randint(900, 9000)))
                else:
                    results.append((result_id, race_id, driver, None, 0.0,
                                    rng.randint(3, 55), None))
    ddl = """CREATE TABLE drivers (
  driverId INTEGER PRIMARY KEY,
  forename TEXT,
  surname TEXT,
  nationality TEXT,
  dob DATE
);
CREATE TABLE races (
  raceId INTEGER PRIMARY KEY,
  year INTEGER NOT NULL,
  round INTEGER NOT NULL,
  name TEXT NOT NULL,
  date DATE
);
CREATE TABLE results (
  resultId INTEGER PRIMARY KEY,
  raceId INTEGER NOT NULL REFERENCES races (raceId),
  driverId INTEGER NOT NULL REFERENCES drivers (driverId),
  position INTEGER,
  points REAL,
  laps INTEGER,
  milliseconds INTEGER
);
"""
    return ddl + inserts("drivers", drivers) + inserts("races", races) + inserts("results", results)


# (db, difficulty, question, evidence, gold, wrong)
EXAMPLES = [
    ("school_district", "simple", "How many schools are in Fresno County?", "",
     "SELECT COUNT(*) FROM schools WHERE County = 'Fresno'",
     "SELECT COUNT(*) FROM schools WHERE District = 'Fresno'"),
    ("school_district", "simple", "List the names of charter schools in Marin County.",
     "charter schools refers to Charter = 1",
     "SELECT School FROM schools WHERE County = 'Marin' AND Charter = 1",
     "SELECT School FROM schools WHERE County = 'Marin'"),
    ("school_district", "simple", "What is the highest average math score among all schools?", "",
     "SELECT MAX(AvgScrMath) FROM satscores",
     "SELECT AVG(AvgScrMath) FROM satscores"),
    ("school_district", "moderate", "Which school has the highest enrollment? Give its name.", "",
     "SELECT T1.School FROM schools AS T1 INNER JOIN frpm AS T2 ON T1.CDSCode = T2.CDSCode "
     "ORDER BY T2.Enrollment DESC LIMIT 1",
     "SELECT T1.School FROM schools AS T1 INNER JOIN frpm AS T2 ON T1.CDSCode = T2.CDSCode "
     "ORDER BY T2.Enrollment ASC LIMIT 1"),
    ("school_district", "moderate", "What is the average free meal rate of schools in Los Angeles County?",
     "free meal rate refers to FreeMealCount / Enrollment",
     "SELECT AVG(T2.FreeMealCount / T2.Enrollment) FROM schools AS T1 INNER JOIN frpm AS T2 "
     "ON T1.CDSCode = T2.CDSCode WHERE T1.County = 'Los Angeles'",
     "SELECT AVG(T2.PercentEligibleFree) * 100 FROM schools AS T1 INNER JOIN frpm AS T2 "
     "ON T1.CDSCode = T2.CDSCode WHERE T1.County = 'Los Angeles'"),
    ("school_district", "moderate",
     "How many schools opened after 2000 have more than 100 SAT test takers?",
     "opened after 2000 refers to OpenDate > '2000-12-31'",
     "SELECT COUNT(*) FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T1.OpenDate > '2000-12-31' AND T2.NumTstTakr > 100",
     "SELECT COUNT(*) FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T1.OpenDate > '2000' AND T2.NumTstTakr >= 100"),
    ("school_district", "moderate",
     "List each county with its number of charter schools, from most to fewest.",
     "charter schools refers to Charter = 1",
     "SELECT County, COUNT(*) FROM schools WHERE Charter = 1 GROUP BY County ORDER BY COUNT(*) DESC",
     "SELECT County, COUNT(*) FROM schools GROUP BY County ORDER BY COUNT(*) DESC"),
    ("school_district", "challenging",
     "Which county has the highest average SAT math score among schools with at least 50 test takers?", "",
     "SELECT T1.County FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T2.NumTstTakr >= 50 GROUP BY T1.County ORDER BY AVG(T2.AvgScrMath) DESC LIMIT 1",
     "SELECT T1.County FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "GROUP BY T1.County ORDER BY MAX(T2.AvgScrMath) DESC LIMIT 1"),
    ("school_district", "challenging",
     "For schools where more than 60% of students are eligible for free meals, what is the average reading score?",
     "more than 60% eligible refers to PercentEligibleFree > 0.6",
     "SELECT AVG(T2.AvgScrRead) FROM frpm AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T1.PercentEligibleFree > 0.6",
     "SELECT AVG(T2.AvgScrRead) FROM frpm AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T1.PercentEligibleFree > 60"),
    ("school_district", "moderate", "What are the names of schools that have no SAT records?", "",
     "SELECT School FROM schools WHERE CDSCode NOT IN (SELECT cds FROM satscores)",
     "SELECT T1.School FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.CDSCode = T2.cds "
     "WHERE T2.NumTstTakr = 0"),
    ("motor_racing", "simple", "How many races were held in 2009?", "",
     "SELECT COUNT(*) FROM races WHERE year = 2009",
     "SELECT COUNT(*) FROM races"),
    ("motor_racing", "simple", "List the surnames of British drivers.",
     "British refers to nationality = 'British'",
     "SELECT surname FROM drivers WHERE nationality = 'British'",
     "SELECT forename, surname FROM drivers WHERE nationality = 'British'"),
    ("motor_racing", "simple", "What is the name of the race held in round 3 of 2010?", "",
     "SELECT name FROM races WHERE year = 2010 AND round = 3",
     "SELECT name FROM races WHERE round = 3"),
    ("motor_racing", "moderate", "How many races did Lewis Hamilton win?",
     "win refers to position = 1",
     "SELECT COUNT(*) FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T2.forename = 'Lewis' AND T2.surname = 'Hamilton' AND T1.position = 1",
     "SELECT COUNT(*) FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T2.surname = 'Hamilton' AND T1.position <= 3"),
    ("motor_racing", "moderate", "Which driver scored the most points in 2011? Give the full name.", "",
     "SELECT T3.forename, T3.surname FROM results AS T1 INNER JOIN races AS T2 ON T1.raceId = T2.raceId "
     "INNER JOIN drivers AS T3 ON T1.driverId = T3.driverId WHERE T2.year = 2011 "
     "GROUP BY T3.driverId ORDER BY SUM(T1.points) DESC LIMIT 1",
     "SELECT T3.forename, T3.surname FROM results AS T1 INNER JOIN races AS T2 ON T1.raceId = T2.raceId "
     "INNER JOIN drivers AS T3 ON T1.driverId = T3.driverId WHERE T2.year = 2011 "
     "GROUP BY T3.driverId ORDER BY SUM(T1.points) ASC LIMIT 1"),
    ("motor_racing", "moderate", "What is the average number of laps completed by German drivers?",
     "German refers to nationality = 'German'",
     "SELECT AVG(T1.laps) FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T2.nationality = 'German'",
     "SELECT AVG(T1.laps) FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T2.nationality = 'German' AND T1.position IS NOT NULL"),
    ("motor_racing", "challenging", "Which nationality has the most race wins?",
     "race wins refers to position = 1",
     "SELECT T2.nationality FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T1.position = 1 GROUP BY T2.nationality ORDER BY COUNT(*) DESC LIMIT 1",
     "SELECT T2.nationality FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "WHERE T1.position = 1 GROUP BY T2.nationality ORDER BY COUNT(*) ASC LIMIT 1"),
    ("motor_racing", "challenging",
     "What percentage of results in 2010 ended without a classified position?",
     "without a classified position refers to position IS NULL; percentage = "
     "SUM(position IS NULL) * 100 / COUNT(*)",
     "SELECT CAST(SUM(CASE WHEN T1.position IS NULL THEN 1 ELSE 0 END) AS REAL) * 100 / COUNT(*) "
     "FROM results AS T1 INNER JOIN races AS T2 ON T1.raceId = T2.raceId WHERE T2.year = 2010",
     "SELECT SUM(CASE WHEN T1.position IS NULL THEN 1 ELSE 0 END) * 100 / COUNT(*) "
     "FROM results AS T1 INNER JOIN races AS T2 ON T1.raceId = T2.raceId WHERE T2.year = 2010"),
    ("motor_racing", "moderate", "List the names of races won by drivers born after 1985.",
     "born after 1985 refers to dob > '1985-12-31'; won refers to position = 1",
     "SELECT DISTINCT T3.name FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "INNER JOIN races AS T3 ON T1.raceId = T3.raceId WHERE T2.dob > '1985-12-31' AND T1.position = 1",
     "SELECT T3.name FROM results AS T1 INNER JOIN drivers AS T2 ON T1.driverId = T2.driverId "
     "INNER JOIN races AS T3 ON T1.raceId = T3.raceId WHERE T2.dob > '1985-12-31' AND T1.position = 1"),
    ("motor_racing", "challenging",
     "What was the fastest finishing time in milliseconds in 2008, and which driver set it?",
     "fastest finishing time refers to MIN(milliseconds)",
     "SELECT T3.forename, T3.surname, T1.milliseconds FROM results AS T1 INNER JOIN races AS T2 "
     "ON T1.raceId = T2.raceId INNER JOIN drivers AS T3 ON T1.driverId = T3.driverId "
     "WHERE T2.year = 2008 AND T1.milliseconds IS NOT NULL ORDER BY T1.milliseconds ASC LIMIT 1",
     "SELECT T3.forename, T3.surname, T1.milliseconds FROM results AS T1 INNER JOIN races AS T2 "
     "ON T1.raceId = T2.raceId INNER JOIN drivers AS T3 ON T1.driverId = T3.driverId "
     "WHERE T2.year = 2008 ORDER BY T1.milliseconds ASC LIMIT 1"),
]


def unit(tag, salt=""):
    h = hashlib.sha256((salt + tag).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2**64


def fenced(lead, sql):
    return f"{lead}\n\n```sql\n{sql}\n```"


def answer(tag, gold, wrong, p_correct, thinking=False, lead="Here is the query."):
    sql = gold if unit(tag) < p_correct else wrong
    if unit(tag, "noanswer") < 0.04:
        return "I am not sure which tables hold this information, so I cannot write the query."
    style = unit(tag, "style")
    if thinking:
        return (f"<think>\nThe question needs {sql.split(' FROM ')[0].lower()}. "
                f"An alternative would be:\n{wrong}\nbut checking the schema again settles it.\n</think>\n\n"
                + fenced(lead, sql))
    if style < 0.15:
        return f"{lead} The final query is {sql};"
    if style < 0.25:
        return f"{lead}\n\n```\n{sql}\n```"
    return fenced(lead, sql)


def plan_text(question, evidence):
    steps = [f"1. Identify the tables needed to answer: {question}"]
    if evidence:
        steps.append(f"2. Apply the hint: {evidence}.")
    steps.append(f"{len(steps) + 1}. Join on the key columns, filter, then aggregate or order as asked.")
    return "\n".join(steps)


def fixtures():
    out = []
    for idx, (db, _diff, question, evidence, gold, wrong) in enumerate(EXAMPLES):
        eid = str(idx)
        add = lambda tag, text: out.append({"tag": f"{eid}/{tag}", "response": text})

        add("baseline.coder", answer(f"{eid}/baseline.coder", gold, wrong, 0.55,
                                     lead="Step by step: find the table, apply the filter."))
        for t in range(0, 4):
            for a in range(1, 4):
                tag = f"mad.agent{a}.round{t}"
                lead = (f"Agent {a} view for round {t}. " +
                        ("I agree with the others." if t else "My first attempt."))
                add(tag, answer(f"{eid}/{tag}", gold, wrong, 0.45 + 0.1 * t, lead=lead))
            if t:
                tag = f"mad.judge.round{t}"
                add(tag, answer(f"{eid}/{tag}", gold, wrong, 0.5 + 0.1 * t,
                                lead="### Verdict\nThe agents' strongest query, corrected:"))
        for k in (1, 2):
            tag = f"planner_coder.planner{k}"
            add(tag, "<think>\nWhich tables matter here?\n</think>\n\n" + plan_text(question, evidence))
        add("planner_coder.coder", answer(f"{eid}/planner_coder.coder", gold, wrong, 0.6,
                                          lead="Following the plan."))
        for i in (1, 2, 3):
            tag = f"coder_aggregator.coder{i}"
            add(tag, answer(f"{eid}/{tag}", gold, wrong, 0.45, lead=f"Candidate reasoning {i}."))
        add("coder_aggregator.aggregator",
            answer(f"{eid}/coder_aggregator.aggregator", gold, wrong, 0.65, thinking=True,
                   lead="Comparing the candidates, the best one is:"))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "desk"))
    args = ap.parse_args()
    root = Path(args.out)
    (root / "sql").mkdir(parents=True, exist_ok=True)
    (root / "sql" / "school_district.sql").write_text(school_district())
    (root / "sql" / "motor_racing.sql").write_text(motor_racing())

    split = []
    for idx, (db, diff, question, evidence, gold, _wrong) in enumerate(EXAMPLES):
        split.append({"question_id": idx, "db_id": db, "question": question,
                      "evidence": evidence, "SQL": gold, "difficulty": diff})
    (root / "dev.json").write_text(json.dumps(split, indent=2) + "\n")

    with open(root / "fixtures.jsonl", "w") as f:
        for rec in fixtures():
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
