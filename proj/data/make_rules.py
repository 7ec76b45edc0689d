#!/usr/bin/env python3
"""Regenerates the per-domain validator rule files and QI lexicons.

The JSON files under rules/ and qi_lexicons/ are the canonical artifacts; this
script exists so the shared universal block stays in sync across domains.
"""
import json
import pathlib

HERE = pathlib.Path(__file__).parent

UNIVERSAL = [
    {
        "id": "ssn",
        "pattern": r"\b\d{3}-\d{2}-\d{4}\b",
        "checksum": "none",
        "reason": "US Social Security number",
    },
    {
        "id": "phone",
        "pattern": r"(\(\d{3}\)\s?|\b\d{3}[-.])\d{3}[-.]\d{4}\b",
        "checksum": "none",
        "reason": "phone number",
    },
    {
        "id": "email",
        "pattern": r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b",
        "checksum": "none",
        "reason": "email address",
    },
    {
        "id": "dob",
        "pattern": r"\b(dob|date of birth|born)\b\s*(:|on)?\s*\d{1,2}[/-]\d{1,2}[/-]\d{2,4}\b",
        "checksum": "none",
        "reason": "formatted date of birth",
    },
]

DOMAIN_RULES = {
    "medical": [
        {
            "id": "mrn",
            "pattern": r"\bMRN\s*(:|#|no\.?|number)?\s*\d{6,10}\b",
            "checksum": "none",
            "reason": "medical record number",
        },
    ],
    "finance": [
        {
            "id": "payment_card",
            "pattern": r"\b(?:\d[ -]?){15}\d\b",
            "checksum": "luhn",
            "reason": "payment card number (Luhn-valid)",
        },
        {
            "id": "routing_number",
            "pattern": r"\brouting\s*(number|no\.?)?\s*(:|#)?\s*\d{9}\b",
            "checksum": "aba",
            "reason": "bank routing number (ABA check digit)",
        },
        {
            "id": "account_number",
            "pattern": r"\baccount\s*(number|no\.?)\s*(:|#)?\s*\d{8,12}\b",
            "checksum": "none",
            "reason": "bank account number",
        },
    ],
    "law": [
        {
            "id": "docket",
            "pattern": r"\b\d:\d{2}-(cv|cr|md|mc|bk)-\d{4,6}\b",
            "checksum": "none",
            "reason": "federal/state docket number",
        },
        {
            "id": "bar_number",
            "pattern": r"\bbar\s+(no\.?|number)\s*(:|#)?\s*\d{5,8}\b",
            "checksum": "none",
            "reason": "bar number",
        },
        {
            "id": "attorney_license",
            "pattern": r"\battorney\s+license\s+(no\.?|number)?\s*(:|#)?\s*\d{5,8}\b",
            "checksum": "none",
            "reason": "attorney license number",
        },
    ],
}

SHARED_LEXICON = {
    "age": [
        r"\b\d{1,3}[- ]year[- ]old\b",
        r"\b[Aa]ged?\s+\d{1,3}\b",
        r"\bin (his|her|their) (early |mid |late )?(twenties|thirties|forties|fifties|sixties|seventies|eighties)\b",
    ],
    "occupation": [
        r"\b(litigator|engineer|teacher|nurse|accountant|paralegal|plumber|electrician|professor|barista|firefighter|surgeon|pharmacist|welder)\b",
        r"\bworks as an? \w+\b",
    ],
    "location": [
        r"\bfrom [A-Z][a-z]+\b",
        r"\b(lives|living|resides) in [A-Z][a-z]+\b",
        r"\bzip code\b",
        r"\b(Omaha|Lincoln|Denver|Austin|Boise|Tulsa|Fresno|Tacoma)\b",
    ],
    "affiliation": [
        r"\b(employed|works) (at|by|for) [A-Z][a-z]+\b",
        r"\bmember of the [A-Z][a-z]+\b",
        r"\bunion local \d+\b",
    ],
    "family": [
        r"\b(two|three|four|\d) (children|kids)\b",
        r"\b(son|daughter|husband|wife|widow|widower|spouse)\b",
        r"\bdependents?\b",
        r"\bheirs?\b",
    ],
}

DOMAIN_LEXICON = {
    "medical": {
        "domain_specific_1": [  # Condition
            r"\b(type 2 diabetes|lupus|rheumatoid arthritis|epilepsy|hypertension|asthma|Crohn's disease)\b",
        ],
        "domain_specific_2": [  # Treatment
            r"\b(metformin|chemotherapy|dialysis|insulin pump|lisinopril|physical therapy)\b",
        ],
        "domain_specific_3": [  # Visit Pattern
            r"\b(weekly|monthly|biweekly) (visits?|appointments?)\b",
            r"\bseen every \d+ (weeks?|months?)\b",
        ],
    },
    "finance": {
        "domain_specific_1": [  # Asset Class
            r"\b(crypto(currency)? holdings?|index funds?|municipal bonds?|rental propert(y|ies)|stock options)\b",
        ],
        "domain_specific_2": [  # Income Band
            r"\bearn(s|ing)? (about |around |roughly )?\$\d{2,3},?\d{3}\b",
            r"\bsix-figure (income|salary)\b",
        ],
        "domain_specific_3": [  # Transactions
            r"\b(wire transfers?|recurring payments?)\b",
            r"\b(deposits?|withdrawals?) of \$\d",
        ],
    },
    "law": {
        "domain_specific_1": [  # Matter Type
            r"\b(custody dispute|wrongful termination|probate matter|asylum claim|medical malpractice)\b",
        ],
        "domain_specific_2": [  # Procedural Role
            r"\b(plaintiff|defendant|petitioner|respondent|appellant)\b",
        ],
        "domain_specific_3": [  # Case Disposition
            r"\b(settled out of court|dismissed with prejudice|acquitted|granted summary judgment)\b",
        ],
    },
}

FORBIDDEN = {
    "indirect_qi": ["year-old", "years old", "aged"],
}


def main():
    for domain in ("medical", "finance", "law"):
        lexicon = dict(SHARED_LEXICON)
        lexicon.update(DOMAIN_LEXICON[domain])
        lex_path = HERE / "qi_lexicons" / f"{domain}.json"
        lex_path.write_text(json.dumps(lexicon, indent=2) + "\n")

        rules = {
            "domain": domain,
            "universal_rules": UNIVERSAL,
            "domain_rules": DOMAIN_RULES[domain],
            "name_list": "../names/common_names.txt",
            "qi_lexicon": f"../qi_lexicons/{domain}.json",
            "forbidden_vocab": FORBIDDEN,
        }
        (HERE / "rules" / f"{domain}.json").write_text(
            json.dumps(rules, indent=2) + "\n")
    print("wrote rule files for medical, finance, law")


if __name__ == "__main__":
    main()
