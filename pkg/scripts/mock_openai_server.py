"""OpenAI-compatible mock chat-completions server for end-to-end drives.

Answers every pipescale prompt with contract-obeying content; codegen
replies are genuinely runnable matplotlib scripts, so the real HTTP
backend plus the real subprocess executor can be exercised end to end:

    python scripts/mock_openai_server.py   # serves 127.0.0.1:8731
    pipescale run --backend http ... (http.base_url: http://127.0.0.1:8731/v1)
"""
import json, re
from fastapi import FastAPI, Request
import uvicorn

app = FastAPI()

@app.post("/v1/chat/completions")
async def complete(request: Request):
    body = await request.json()
    system = body["messages"][0]["content"]
    user = body["messages"][1]["content"]
    if isinstance(user, list):
        user = user[0]["text"]
    # crude template detection from the rendered system prompt
    if "data curator" in system:
        text = "## About Dataset\nA table of yearly paper counts by venue.\n"
    elif "visualization expert" in system:
        m = re.search(r"Generate (\d+)", system)
        n = int(m.group(1))
        dirs = [{"topic": f"t{j}", "chart_type": "bar", "variables": ["year", "papers"],
                 "explanation": "trend", "parameters": {}} for j in range(n)]
        text = "```json\n" + json.dumps(dirs) + "\n```"
    elif "code generator" in system or "code rectifier" in system:
        source = system if "code generator" in system else user
        data = re.search(r'pd\.read_csv\("([^"]+)"\)', source).group(1)
        out = re.search(r'plt\.savefig\("([^"]+)"\)', source).group(1)
        code = ("import matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n"
                "import pandas as pd\n"
                f"df = pd.read_csv(\"{data}\")\n"
                "plt.figure(figsize=(4,3))\n"
                "df.groupby('year')['papers'].sum().plot(kind='bar')\n"
                "plt.title('papers per year')\nplt.xlabel('year')\nplt.ylabel('papers')\n"
                "plt.tight_layout()\n"
                f"plt.savefig(\"{out}\")\nplt.close()\n")
        text = "```python\n" + code + "```"
    elif "automated reviewer" in system:
        text = '```json\n{"is_legible": true, "evidences": ["axes readable"]}\n```'
    elif "data analyst" in system:
        m = re.search(r"generate (\d+)", system)
        n = int(m.group(1))
        ins = {"insights": [{"description": f"papers rise after 2010 (series {k})"} for k in range(n)]}
        text = "```json\n" + json.dumps(ins) + "\n```"
    elif "professional evaluator" in system:
        if "Correctness & Factuality" in system:
            scores = {"Correctness & Factuality": 80, "Specificity & Traceability": 70,
                      "Insightfulness & Depth": 60, "So-what quality": 90}
        elif "InterpretiveValue" in system:
            scores = {"Correctness": 75, "Specificity": 70, "InterpretiveValue": 65}
        else:
            scores = {"Readability": 90, "OnTopic": 85, "TrendAlignment": 80}
        text = "```json\n" + json.dumps({"insight": "x", "scores": scores,
                                         "evidence": "ok", "conclusion": "fine"}) + "\n```"
    elif "rank" in system.lower():
        n = len([ln for ln in user.splitlines() if re.match(r"^\d+:", ln)])
        text = "```json\n" + json.dumps({"ranking": list(range(1, n + 1)), "evidence": "order"}) + "\n```"
    else:
        text = "unhandled"
    return {"choices": [{"message": {"content": text}}],
            "usage": {"completion_tokens": max(1, len(text) // 4)}}

if __name__ == "__main__":
    uvicorn.run(app, host="127.0.0.1", port=8731, log_level="error")
