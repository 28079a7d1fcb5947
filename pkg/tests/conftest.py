"""Shared fixtures: the shipped GLP-1 workflow, its golden set and artifacts"""

import json

import pytest

from codefoundry.foundry import assemble_artifact, select_modules, select_template
from codefoundry.generators import ClientRole, FixtureGenerator
from codefoundry.library import default_libraries
from codefoundry.resources import get_data_path
from codefoundry.specmodel import load_spec, parse_spec
from codefoundry.validator import load_golden

GLP1_WORKFLOW_ID = "glp_1_agonist_medical_necessity_review"

GLP1_LOGIC = (
    'IF has_t2d_diagnosis THEN APPROVED "Type 2 Diabetes Diagnosis"\n'
    'ELSE IF (bmi >= 30) AND has_step_therapy_failure THEN APPROVED "BMI>=30 + Step Therapy"\n'
    'ELSE DENIED "Does not meet criteria"\n'
)

T2D_EXTRACTION = {
    "has_t2d_diagnosis": True,
    "current_a1c": 8.1,
    "bmi": 27.4,
    "has_step_therapy_failure": False,
}

T2D_INPUTS = {
    "patient_chart_summary": (
        "58-year-old with type 2 diabetes on metformin for four years. "
        "Most recent A1C 8.1 percent. BMI 27.4."
    )
}

EXPENSE_SPEC = """
metadata:
  name: "Expense Check"
  compliance: ["SOX"]
inputs:
  - {name: amount, type: real}
  - {name: has_receipt, type: boolean}
logic_requirements:
  - step: approve_expense
    type: deterministic_rule
    logic: Deny missing receipts, review above 5000, approve the rest.
"""

EXPENSE_LOGIC = (
    'IF NOT has_receipt THEN DENIED "Missing receipt"\n'
    'ELSE IF amount > 5000.0 THEN HUMAN_REVIEW "Large expense"\n'
    'ELSE APPROVED "Within policy"\n'
)


@pytest.fixture(scope="session")
def libraries():
    return default_libraries()


@pytest.fixture(scope="session")
def glp1_spec_path():
    return get_data_path("workflows", "prior_auth_glp1_v1.yaml")


@pytest.fixture(scope="session")
def glp1_spec(glp1_spec_path):
    return load_spec(glp1_spec_path)


@pytest.fixture(scope="session")
def glp1_golden():
    return load_golden(get_data_path("golden", f"{GLP1_WORKFLOW_ID}.jsonl"))


@pytest.fixture(scope="session")
def glp1_artifact(glp1_spec, libraries):
    """GLP-1 artifact assembled from the canonical logic and sealed"""
    template = select_template(glp1_spec, libraries.templates)
    modules = select_modules(template, libraries.modules)
    return assemble_artifact(template, modules, GLP1_LOGIC, glp1_spec).sealed()


@pytest.fixture(scope="session")
def expense_spec():
    return parse_spec(EXPENSE_SPEC)


@pytest.fixture(scope="session")
def expense_artifact(expense_spec, libraries):
    template = select_template(expense_spec, libraries.templates)
    modules = select_modules(template, libraries.modules)
    return assemble_artifact(template, modules, EXPENSE_LOGIC, expense_spec).sealed()


@pytest.fixture
def t2d_client():
    return FixtureGenerator.for_extractions({"extract_clinical_factors": T2D_EXTRACTION})


@pytest.fixture
def generation_client():
    """Privileged fixture client holding the canonical GLP-1 generation"""
    return FixtureGenerator({GLP1_WORKFLOW_ID: GLP1_LOGIC}, role=ClientRole.PRIVILEGED)


@pytest.fixture
def t2d_case_file(tmp_path):
    path = tmp_path / "case_t2d.json"
    path.write_text(
        json.dumps(
            {
                "inputs": T2D_INPUTS,
                "mocked_extractions": {"extract_clinical_factors": T2D_EXTRACTION},
            }
        )
    )
    return path
