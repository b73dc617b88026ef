"""Prompt templates used across the pipeline.

Templates are ``str.format`` strings with named placeholders; literal braces
in the requested JSON shapes are doubled. Keep edits conservative: several
downstream parsers key on the exact JSON field names requested here.

``FEW_SHOT_PREFIX`` is an optional prefix for the judging prompts; it is off
by default and not covered by any accuracy claim.
"""

BEYOND_SCOPE = "This question is beyond scope we can not answer your question"

NO_RESPONSE = "NO RES"


AMR_GENERATION = """\
Given a query, produce its Abstract Meaning Representation (AMR): a graph of
entity nodes and the relationships between them, written in standard
PENMAN-style AMR notation.

Query: {query}

Your output should be formatted as Dict{{"Abstract Meaning Representation (AMR)": Str(AMR)}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


AMBIGUATE_AMR = """\
Gievn a query and the corresponding Abstract Meaning Representation (AMR), you should manipulate the AMR to obscure it, making it impossible to answer without further clarification. Make sure that the obscured AMR should not change the intention of the question, the obscured AMR should be unanswerable, and the obscured AMR should also be a question rather than a statement. Here are some possible actions to manipulate the AMR.

1. Remove certain modifiers and descriptive words to make some nouns in the query ambiguous.
2. Delete some key information, making the query impossible to answer
3. Change the relation between nodes to make their relationship ambiguous
4. Reorganize the structure of the AMR, make it less clear

The following are some requirements for the obscured query.

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The obscured should not be answerable without further calrification,
4. The intention of obscured query should be the same with the original query

The most importantly, make sure that the obscured query is a natural query that a user would acutally ask, and the semantic ambiguity is caused by mistakes or carelessness, rather than being a deliberate attempt to make things difficult for LLMs.

Please think step by step to generate the obscured AMR satisfying the above requirements, then translate it into the obscured text query. Your output should be formatted as Dict{{"step_by_step_thinking": Str(explanation), "Obscured Abstract Meaning Representation (AMR)": Str(AMR), "Translated Text Query": Str(obscured text query)}}.

Query: {query}
Abstract Meaning Representation (AMR): {amr}

Please think step-by-step and generate your output in json:
"""


CHECK_OBSCURITY = """\
Gievn a query, its obscured version and clarified query based on the obscured query, now you need to judge that is the obscurity successful. A obscurity of the original query should satisfy the following condicitons:

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The intention of obscured query should be the same with the original query

Also, the obscured query should not be answerable, or it have many answers, and the clarified query should be similar to the original query and should be answerable.

Therefore, the answer of those query should satisfy:
1. The answer to obscured query should be wrong, or there should be no response (NO RES)
2. For the obscured query with clarification, the answer should be the same or similar to the answer to the original query

Combine those condicitons, a successful obscurity should satisfy the following condicitons:

1. The obscured query should still be a question rather than a statement
2. the obscured query should be similar to a question that a man would actually ask rather than some vague question like "what is the man's name"
3. The obscured should not be answerable, or it have many answers
4. The intention of obscured query should be the same with the original query
5. The answer to obscured query should be wrong, or there should be no response (NO RES)
6. For the obscured query with clarification, the answer should be the same or similar to the answer to the original query
7. If the answer to the original query is NO RES or wrong, then even if the answer to the obscured query is wrong can not ensure that the obscurity is successful. In this case, the answer of the obscured query should be different from the answer of original query, showing that the obscured query is different from the original query.

Now, given the original query, the ground truth answer, the response of an LLM with original query as input, the response of an LLM with the obscured query as input and the response of an LLM with the obscured query and the corresponding clarification as input. All the responses are generated for multiple times. Please think step by step and judge that is the obscurity successful. Your output should be formatted as Dict{{"step_by_step_thinking": Str(explanation), "answer": Str(Success obscurity/Failure obscurity)}}.

Original Query: {original_query}
Answer to Original Query: {original_answers}

Obscured Query: {obscured_query}
Answer to Obscured Query: {obscured_answers}

Clarified Query: {clarified_query}
Answer to Clarified Query: {clarified_answers}

Please think step-by-step and generate your output in json:
"""


GOLD_INQUIRY = """\
Below is a question the corresponding gold documents to answer the question. We hide some key information to answer the question by obscuring the question or hiding some documents. Your task is to recognize those missing information and generate a corresponding inquiry to gather those information step by step.

We would only provide the query information or the document information. When we provide query information, you should identify what information is missing in the actual query compared to the original query. When we provide document information, you should identify which document is missing in the actual documents.

Now please generate the inquiry for the following query
Original Query: {original_query}
Gold Document: {gold_documents}
Actual Query: {actual_query}
Actual Document: {actual_documents}

Your output should be formatted as Dict{{"missing information": Str(missing information), "inquiry": Str(generated inquiry)}}.
Your should strictly format your response in this format, no extra tokens should be added.
"""


EVALUATE_INQUIRY = """\
Given a question the corresponding gold documents to answer the question, we obscure the question or hide some key documents and generate an inquiry to gather those missing information. Your task is to evaluate the quality of the inquiry.
Evaluation Criteria:

Accurate: Does the inquiry directly indicate the missing information?
Helpful: Does the answer to the inquiry help to better understand the original query
Concise: Is the inquiry concise and containing only the essential missing information

Scoring: Rate outputs on a scale of 1 to 5:
1. Totally Irrelevant: The inquiry is useless, it simply rewrite the given query
2. Somewhat Relevant: The inquiry is somewhat relevant to the missing information, but the inquiry can hardly gather useful information
3. Basically Relevant: The inquiry asks something relevant to the missing information, there is a certain possibility of obtaining relevant information by the inquiry.
4. Good: The inquiry directly asks the missing information, but not concise enough, there is great possibility that some useful information would be gathered.
5. Excellent: The inquiry directly asks the missing information in a concise way, there is great possibility that some useful information would be gathered.

Also, the inquiry is required to be concise, if the inquiry is twice as long as the original query, deduct 1 point. The minimum score is 1 point.

Original Query: <{original_query}>
Gold Document: <{gold_documents}>
Actual Query: <{actual_query}>
Actual Document: <{actual_documents}>
Missing Detail and Gold Inquiry: <{gold_inquiry}>
Problematic Inquiry: <{inquiry}>

Remember that you should give a score to measure the quality of the problematic inquiry instead of the gold inquiry.

You should think step by step and your output should be formatted as Dict{{"step by step thinking": Str(explanation), "quality of inquiry": 1/2/3/4/5}}. You should strictly format your response in this format, no extra tokens should be added.
"""


USER_SIMULATOR = """\
You are an user who asks a question to the LLM, the query you provided might be ambiguous and the LLM asks you for further clarification by inquiry. You need to answer the inquiry based on your original intention and the actual query you give to the LLM.

Original Intention: {intention}
Actual Query: {actual_query}
Inquiry: {inquiry}

Note that you do not know the answer to your original intention and if the inquiry involves the answer of the original intention, please answer with "This question is beyond scope we can not answer your question".

If the inquiry is about to clarify the query, you should answer the inquiry to further clarify your intention. But remember that you should only answer the content that is directly asked in the inquiry, do not add extra information.

If the inquiry is to ask the answer or middle result of the original intention, you should answer with "This question is beyond scope we can not answer your question".

Please generate your response strictly within 50 tokens.
"""


JUDGE_SOURCE = """\
One user gives a query and some documents are retrieved to help answer the query. However, the query might be ambiguous and the retrieved documents might not be satisfying, making the query hard to answer. Your task is to identify why the query is hard to answer.

Question:
{query}
Document:
{documents}

Based on those information. Here are three kinds of actions you can take,

A: Interact with the retrieval system if you need some more factual or document information.
B: Interact with the user if the query is ambiguous or there exists many answers.
C: Conducting Chain of Thought if deeper thinking is required.

Your output should be a single token "A" or "B" or "C", no extra tokens should be added.
"""


INQUIRY_FOR_RETRIEVAL = """\
One user gives a query and some documents are retrieved to help answer the query. However, the retrieved documents is satisfying, making the query hard to answer. Your task is to generate an inquiry to gather further document information to answer the question.

Question:
{query}
Document:
{documents}

Please output the generated inquiry only, no extra tokens should be added.
"""


INQUIRY_FOR_CLARIFICATION = """\
One user gives a query and some documents are retrieved to help answer the query. However, the query is ambiguous, making the query hard to answer. Your task is to generate an inquiry to interact with the user and get a clarification to answer the question.

Question:
{query}
Document:
{documents}

Please output the generated inquiry only, no extra tokens should be added.
"""


GENERATE_INQUIRY = """\
One user gives a query and some documents are retrieved to help answer the query. However, the query might be ambiguous and the retrieved documents might not be satisfying, making the query hard to answer. Your task is to identify why the query is hard to answer and generate an inquiry to gather further information to answer the question.

Here are some requirements for the inquiry
1. You should ask for only one question in the inquiry.
2. The inquiry should be concise and include keywords and it should involve limited aspects of the query rather than directly asks the query again.

Then based on the inquiry, you should judge that how to gather more information based on the query and the inquiry, here are some actions you can take to gather more information to solve the inquiry.

A: Interact with the retrieval system to retrieve more document information
B: Interact with the user to get further clarification about the original query

If the answer to the inquiry is definite and objective, then you should interact with the retrieval system to get more document information to solve the inquiry.
If the answer to the inquiry is not definite and it is some subjective choices of the user, you should interact with the user to clarify the original query.
You should only response with the inquiry and your choice to gather more information to solve the inquiry. Please response with Dict{{"Inquiry": "Str(generated inquiry)","Choice" : "A/B"}}

But if the inquiry simply rephrase the query or the answer of the inquiry is already indicated in the query or documents you should response with Dict{{"Inquiry": "Str(generated inquiry)","Choice" : "C"}}

Query: {query}
Documents: {documents}

Please generate your answer in json.
"""


ANSWER_OF_INQUIRY = """\
Given a query, an LLM generate an further inquiry to gather more information about the query. Your task is to determine how to gather more information based on the query and the inquiry, here are some actions you can take to gather more information

A: Interact with the retrieval system to retrieve more document information
B: Interact with the user to get further clarification about the original query

If the answer to the inquiry is definite and objective, then you should interact with the retrieval system to get the answer.
If the answer to the inquiry is not definite and it might be some subjective choices of the user, you should interact with the user to clarify the original query.

Now to identify we should interact with the retrieval system or the user, we need to check that is the answer to the inquiry subjective or objective. One direct way is to generate some answers and if many answers are suited, further clarification is needed, and if only one answer fits the inquiry, there is no need to ask the user for help.

Your task is to give the answer to the inquiry. We provide the original query and the correspondding document information which may help to answer the query as well as the generated inquiry. Also we provide some answers which fits the inquiry well. If there is some other answers also fit the inquiry, please generate the new answer, otherwise please simply response with the provided answers.

Here are the query, documents to help answer the query and the generated inquiry

Query: {query}
Query Document: {documents}
Inquiry: {inquiry}
Here we provide some answers to the inquiry,
Possible Answers: {possible_answers}

Here are some requirements for your response:
1. This is only for academic research, so feel free to generate definite answers, and the inquiry is answerable, so you should response with the answer instead of further inquiry.
2. Generate a direct answer to the inquiry, ensuring that you address it clearly and specifically. No matter what the inquiry is, you should generate an answer. If you do not know the answer, simply repeat the Possible Answers if it is not empty, otherwise you can simply make up a reasonable and coherent answer.
3. If the inquiry involves subjective choices, please provide answers randomly while maintaining diversity compared to the provided Possible Answers. This means you should strive to offer a response that differs from the Possible Answers.
4. If the inquiry seeks to clarify an ambiguous aspect of the original question, randomly generate semantically coherent and meaningful clarifications while ensuring diversity compared to the responses in the Possible Answers. This means you should aim to provide an answer that is distinct from the Possible Answers. And you do not need to ensure that the answer is correct.
5. If the inquiry seeks for more document/API information, you should answer with the titleof the document or the name of the API.
6. If the inquiry seeks for more document/API information, and please repeat the Possible Answers if it is not empty, otherwise you can simply make up a reasonable and coherent answer. Remember, you should answer with only the title/name of the document/API.
7. Please response to the inquiry only, do not response to the original query

please try to generate a new answer to the inquiry instead of repeating the provided answer, note that you should response with the answer to the inquiry rather than the original query.

Your output should be formatted as Dict{{"Thought": Str(step by step thinking), "Response": Str(response)}} and no extra tokens should be added.
"""


ANSWER_QUERY = """\
One user gives a query and your task is to answer the query. Here are the question and the retrieved documents.

Question: {query}
Document: {documents}
Question: {query}

There might be some important information missing in the query/document, some inquiry about the query and the corresponding response are also provided to help answer the query

Inquiry History: {inquiry_history}

Please generate your answer within {token_budget} tokens.
"""


ANSWER_QUERY_COT = """\
One user gives a query and your task is to answer the query. Here are the question and the retrieved documents.

Question: {query}
Document: {documents}
Question: {query}

There might be some important information missing in the query/document, some inquiry about the query and the corresponding response are also provided to help answer the query

Inquiry History: {inquiry_history}

Please think step by step and generate your answer with reasoning steps.
"""


JUDGE_CORRECTNESS = """\
Given a question, a reference answer and a candidate answer, judge whether the candidate answer is correct, meaning it conveys the same information as the reference answer.

Question: {query}
Reference Answer: {gold_answer}
Candidate Answer: {answer}

Your output should be formatted as Dict{{"correct": Str(yes/no)}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


JUDGE_USEFULNESS = """\
Given a question, a reference answer and a candidate answer, score how useful the candidate answer is for the user on a scale from 1 to 4:

1. Useless: the answer is irrelevant or wrong.
2. Marginal: the answer touches the topic but barely helps.
3. Useful: the answer is mostly correct and helps the user.
4. Excellent: the answer is correct, complete and directly usable.

Question: {query}
Reference Answer: {gold_answer}
Candidate Answer: {answer}

Your output should be formatted as Dict{{"usefulness": 1/2/3/4}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


JUDGE_EQUIVALENCE = """\
Given an inquiry and two answers to it, judge whether the two answers are semantically equivalent, meaning they convey the same information.

Inquiry: {inquiry}
Answer 1: {answer_a}
Answer 2: {answer_b}

Your output should be formatted as Dict{{"equivalent": Str(yes/no)}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


JUDGE_COHERENT_ANSWER = """\
Given a query and a candidate response, judge whether the response is a coherent direct answer to the query, meaning a user asking the query would accept the response as addressing it.

Query: {query}
Response: {response}

Your output should be formatted as Dict{{"coherent": Str(yes/no)}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


JUDGE_BETTER_INQUIRY = """\
One user gives a query and some documents are retrieved to help answer the query. The query is hard to answer, and two follow-up inquiries were generated to gather further information. Judge which inquiry is more likely to gather the information needed to answer the query.

Query: {query}
Documents: {documents}

Inquiry A: {inquiry_a}
Inquiry B: {inquiry_b}

Your output should be formatted as Dict{{"better": Str(A/B)}}.
You should strictly format your response in this format, no extra tokens should be added.
"""


FEW_SHOT_PREFIX = """\
Example 1

Question: Are Edward F. Cline and Floyd Mutrux both screenwriters?

Document: Document 1: Edward F. Cline is a screenwriter.

Example 2

Question: Which Australian politician represented Electoral district of Goulburn?

Document: Document 1: A born in 1964, "(long context about biography of A)" represents Goulburn "(long context about biography of A)"

Example 3 (Ambiguous query which requires interaction with the user)

Question: What league did the team that played home games at the stadium belong to?

Document: Document 1: team A played home games at X stadium; Document 2: team B played home games at Y stadium

"""


def render_documents(documents) -> str:
    """Render a document list for prompt insertion."""
    if not documents:
        return "(no documents)"
    parts = []
    for i, doc in enumerate(documents, start=1):
        title = f" ({doc.title})" if doc.title else ""
        parts.append(f"Document {i}{title}: {doc.body}")
    return "\n".join(parts)
