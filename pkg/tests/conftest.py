import json

import pytest

from autoconv.backend import ScriptedBackend
from autoconv.corpus import Document


@pytest.fixture
def quac_file(tmp_path):
    """Two context paragraphs, each with a 3-question dialogue."""
    data = {
        "data": [
            {
                "title": "Meridian",
                "section_title": "1998 release",
                "background": "Meridian was a studio album.",
                "paragraphs": [
                    {
                        "id": "C_alpha_0",
                        "context": (
                            "Meridian was released on 5 March 1998. The album reached "
                            "number one in several countries. Critics praised the "
                            "production and the lead single. CANNOTANSWER"
                        ),
                        "qas": [
                            {
                                "id": "C_alpha_0_q#0",
                                "question": "When was Meridian released?",
                                "answers": [
                                    {"text": "5 March 1998", "answer_start": 25},
                                    {"text": "on 5 March 1998", "answer_start": 22},
                                ],
                                "orig_answer": {"text": "5 March 1998", "answer_start": 25},
                                "followup": "y",
                                "yesno": "x",
                            },
                            {
                                "id": "C_alpha_0_q#1",
                                "question": "Did it chart well?",
                                "answers": [
                                    {
                                        "text": "The album reached number one in several countries.",
                                        "answer_start": 40,
                                    }
                                ],
                                "orig_answer": {
                                    "text": "The album reached number one in several countries.",
                                    "answer_start": 40,
                                },
                                "followup": "m",
                                "yesno": "y",
                            },
                            {
                                "id": "C_alpha_0_q#2",
                                "question": "Who produced the album?",
                                "answers": [{"text": "CANNOTANSWER", "answer_start": 170}],
                                "orig_answer": {"text": "CANNOTANSWER", "answer_start": 170},
                                "followup": "n",
                                "yesno": "x",
                            },
                        ],
                    }
                ],
            },
            {
                "title": "Harbor Lights",
                "section_title": "Touring years",
                "background": "A band history section.",
                "paragraphs": [
                    {
                        "id": "C_beta_0",
                        "context": (
                            "Harbor Lights toured for two years after 2003. The tour "
                            "visited forty cities. A live record followed in 2006. "
                            "CANNOTANSWER"
                        ),
                        "qas": [
                            {
                                "id": "C_beta_0_q#0",
                                "question": "How long did they tour?",
                                "answers": [{"text": "two years", "answer_start": 25}],
                                "orig_answer": {"text": "two years", "answer_start": 25},
                                "followup": "y",
                                "yesno": "x",
                            },
                            {
                                "id": "C_beta_0_q#1",
                                "question": "How many cities?",
                                "answers": [
                                    {"text": "forty cities", "answer_start": 63},
                                    {"text": "The tour visited forty cities.", "answer_start": 47},
                                ],
                                "orig_answer": {"text": "forty cities", "answer_start": 63},
                                "followup": "m",
                                "yesno": "x",
                            },
                            {
                                "id": "C_beta_0_q#2",
                                "question": "What came after the tour?",
                                "answers": [
                                    {"text": "A live record followed in 2006.", "answer_start": 78}
                                ],
                                "orig_answer": {
                                    "text": "A live record followed in 2006.",
                                    "answer_start": 78,
                                },
                                "followup": "n",
                                "yesno": "x",
                            },
                        ],
                    }
                ],
            },
        ]
    }
    path = tmp_path / "quac_dev.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def coqa_file(tmp_path):
    """One story with five QA pairs, three extra annotator references."""
    story = (
        "Mira kept a small garden behind the bakery. She grew tomatoes and "
        "basil every summer. Her neighbor Tomas watered the plants when she "
        "traveled. One August the garden won a village prize. Mira shared the "
        "prize money with Tomas."
    )
    questions = [
        "Who kept the garden?",
        "What did she grow?",
        "Who watered the plants?",
        "What happened in August?",
        "Did she keep all the money?",
    ]
    answers = ["Mira", "tomatoes and basil", "Tomas", "the garden won a village prize", "no"]
    alt = {
        "0": ["Mira", "tomatoes and basil", "her neighbor Tomas", "it won a village prize", "no"],
        "1": ["Mira kept it", "tomatoes", "Tomas", "the garden won a prize", "unknown"],
        "2": ["Mira", "basil and tomatoes", "Tomas", "won a village prize", "no"],
    }
    data = {
        "version": "1.0",
        "data": [
            {
                "source": "fiction",
                "id": "garden-1",
                "filename": "garden.txt",
                "story": story,
                "questions": [
                    {"input_text": q, "turn_id": i + 1} for i, q in enumerate(questions)
                ],
                "answers": [
                    {
                        "input_text": a,
                        "span_start": 0,
                        "span_end": 1,
                        "span_text": a,
                        "turn_id": i + 1,
                    }
                    for i, a in enumerate(answers)
                ],
                "additional_answers": {
                    key: [
                        {"input_text": a, "span_start": 0, "span_end": 1, "turn_id": i + 1}
                        for i, a in enumerate(texts)
                    ]
                    for key, texts in alt.items()
                },
            }
        ],
    }
    path = tmp_path / "coqa_dev.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def album_doc():
    return Document(
        id="doc-album",
        title="Night Signal",
        section_title="Second album",
        text=(
            "Night Signal released their second album Driftwork on 5 March 1998. "
            "The record sold eighty thousand copies in its first week. "
            "The band toured nine countries in support of the release. "
            "The lead single reached number four on the national chart. "
            "A deluxe edition followed with three extra tracks. "
            "The closing song features a guest vocal from Ana Reyes. "
            "Critics praised the drumming and the restrained production."
        ),
        source="custom",
    )


#: questions alternate with answers copied from album_doc (fully grounded)
FOURTEEN_TURN_SCRIPT = [
    "What was the evolution?",
    "Night Signal released their second album Driftwork on 5 March 1998.",
    "How did it sell?",
    "The record sold eighty thousand copies in its first week.",
    "Did they tour?",
    "The band toured nine countries in support of the release.",
    "How did the single do?",
    "The lead single reached number four on the national chart.",
    "Was there another edition?",
    "A deluxe edition followed with three extra tracks.",
    "Who sang the guest vocal?",
    "The closing song features a guest vocal from Ana Reyes.",
    "What did critics say?",
    "Critics praised the drumming and the restrained production.",
]


@pytest.fixture
def fourteen_turn_script():
    return list(FOURTEEN_TURN_SCRIPT)


@pytest.fixture
def fourteen_turn_backend():
    return ScriptedBackend(list(FOURTEEN_TURN_SCRIPT))
