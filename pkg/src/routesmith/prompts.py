"""Prompt templates for operator generation, crossover, and mutation.

Template bodies are stored byte-exact (including the C++-oriented wording
and code fences of the reference material) and are guarded by pinned
digests in the test suite; do not reflow them. Rendering substitutes only
declared ``{slot}`` placeholders, so literal braces in embedded code
survive untouched.

Two binding sets are provided: ``reference_bindings`` carries the original
C++ interface material (used by the fidelity tests), while
``runtime_bindings`` describes this package's Python operator interface
and is what discovery runs actually send.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .candidates import SEED_SOURCE
from .errors import RenderError
from .util import sha256_hex

SYSTEM_BODY = """You are an operations research expert. Your task is to design new heuristics for an existing **Large Neighborhood Search (LNS)** framework applied to the {problem_name_long}. The framework iteratively improves a given initial solution through the following steps:
1. **Customer Removal**: Select a subset of customers to remove using a specified heuristic.
2. **Solution Perturbation**: Remove the selected customers from their tours. This results in an infeasible solution where the removed customers are no longer served.
3. **Customer Ordering**: Order the removed customers using another heuristic.
4. **Greedy Reinsertion**: Reinsert the removed customers one by one into the tours, following the order defined in step 3.

Your job is to implement **new heuristics for:**
- **Step 1**: Customer selection (`select_by_llm_1`)
- **Step 3**: Ordering of the removed customers (`sort_by_llm_1`)

All other components of the LNS framework are fixed and **cannot be modified**.

# Routing Problem Description
{problem_desc}

# Other implementation notes and requirements:
- The framework is implemented in **C++**.
- The LNS targets **large instances** (e.g., more than 500 customers).
- Only a small number of customers should be removed in each iteration.
- The selected customers do **not need to form a single compact cluster**, but **each selected customer should be close to at least one or a few other selected customers**. This encourages meaningful changes during greedy reinsertion.
- The heuristic must incorporate **stochastic behavior** to ensure sufficient diversity over **millions of iterations**.
- The search is limited by runtime, meaning that the two new heuristics should be very fast.

# Code style
- IMPORTANT: DO NOT ADD ***ANY*** COMMENTS unless asked
"""

SEED_BODY = """[TASK]
Write high-quality heuristics for `select_by_llm_1` and `sort_by_llm_1` in the LNS framework. Write the full code file in a ```cpp``` code block.

# Example implementation
{seed_code}

# Libary context
You are also provided with some selected header function information with comments that could be useful:
{LNS_headers}
"""

CROSSOVER_BODY = """[Better Code]
{code_parent_1}

[Worse Code]
{code_parent_2}

[Task]
Write new high-quality heuristics for `select_by_llm_1` and `sort_by_llm_1` in the LNS framework. Your implementation
should be a crossover of the two implementations above, taking most ideas from the better code ({bias_percent}
Ensure that the new code maintains a comparable overall complexity and length to the two implementations above.
Output code only and enclose your code with C++ code block: ```cpp ... ```. Do not comment your code.
"""

# Unbiased variant used by the standard-crossover ablation mode.
CROSSOVER_STANDARD_BODY = """[Better Code]
{code_parent_1}

[Worse Code]
{code_parent_2}

[Task]
Write new high-quality heuristics for `select_by_llm_1` and `sort_by_llm_1` in the LNS framework. Your implementation
should be a crossover of the two implementations above, taking roughly half the elements from each implementation.
Ensure that the new code maintains a comparable overall complexity and length to the two implementations above.
Output code only and enclose your code with C++ code block: ```cpp ... ```. Do not comment your code.
"""

MUTATION_ABLATION_BODY = """[Code]
{code}

[Task]
To simplify the heuristics implemented in  `select_by_llm_1` and `sort_by_llm_1` we want to conduct an ablation study.
Choose a random mechanic/component from the code that you think might not be important and remove any trace of it from the code. We will
then run your code to evaluate the impact of the removed component. Output code only and enclose your code with C++ code block: ```cpp ... ```.
"""

MUTATION_EXTEND_BODY = """[Code]
{code}

[Task]
The goal is improve the heuristics implemented in `select_by_llm_1` and `sort_by_llm_1`.
Add a new mechanic/component to the code above. Be innovative. We will
then run your code to evaluate the impact of the new component. Output code only and enclose your code with C++ code block: ```cpp ... ```.
"""

MUTATION_ADJUST_BODY = """[Code]
{code}

[Task]
The goal is to find new parameter settings for heuristics implemented in `select_by_llm_1` and `sort_by_llm_1`.
Modify the parameters of the code above to improve the effectiveness of the heuristic. If there are magic numbers in the code, replace them with constants that are set at the beginning of each function.
Do not make any other changes to the code.
Output code only and enclose your code with C++ code block: ```cpp ... ```.
"""

MUTATION_REFACTOR_BODY = """[Code]
{code}

[Task]
The goal is improve the runtime of the heuristics implemented in `select_by_llm_1` and `sort_by_llm_1`.
Modify the code so that the runtime is reduced. It is ok to slightly change the logic of the heuristic to achieve this.
Output code only and enclose your code with C++ code block: ```cpp ... ```.
"""

# ---------------------------------------------------------------------------
# Reference binding material (C++ interface of the original framework).

CVRP_PROBLEM_DESC = """The Capacitated Vehicle Routing Problem (CVRP) involves determining a set of delivery routes from a depot to a group of customers, where each customer has a specific demand and each vehicle has a fixed capacity. The objective is to design routes that minimize the total distance traveled, while ensuring that:
Each route starts and ends at the depot.
Each customer is visited exactly once by a single vehicle.
The total demand on any route does not exceed the vehicle capacity.

There is no limit on the number of vehicles that can be used."""

CPP_LNS_HEADERS = """From `Instance.h`:

```cpp
struct Instance {
    int numNodes; // Total number of nodes including depot
    int numCustomers; // Total number of customers (excluding depot)
    int vehicleCapacity; // Capacity of the vehicle (identical for all vehicles)
    std::vector<int> demand;  // Demand of each node (with the depot at index 0 having a demand of 0)
    std::vector<std::vector<float>> distanceMatrix; //Distance matrix between nodes
    std::vector<std::vector<float>> nodePositions; // Node positions in 2D space
    std::vector<std::vector<int>> adj; // Adjacency list for each node, sorted by distance
}
```

From `Solution.h`:

```cpp
struct Solution {
    const Instance& instance; // Reference to the instance to avoid copying
    float totalCosts; // Total cost of the solution
    std::vector<Tour> tours; // List of tours in the solution
    std::vector<int> customerToTourMap; // Map from each customer to its tour index. This can be used to
    // quickly find which tour a customer belongs to, e.g. solution.tours[solution.customerToTourMap[c]] returns the tour of customer c.
}
```

From `Tour.h`:

```cpp
struct Tour {
    std::vector<int> customers; // Customers in the tour, excluding depot
    int demand = 0; // Total demand of the tour
    float costs = 0;  // Total cost of the tour including distance to and from the depot
}
```

From `Utils.h`:
```cpp
int getRandomNumber(int min, int max);
float getRandomFraction(float min = 0.0, float max = 1.0);
float getRandomFractionFast(); // Function to generate a random fraction (float) in the range [0, 1] using a fast method
std::vector<int> argsort(const std::vector<float>& values); // Function to perform argsort on a vector of float values
```"""

CPP_SEED_CODE = """#include "AgentDesigned.h"
#include <random>
#include <unordered_set>
#include "Utils.h"

// Customer selection
std::vector<int> select_by_llm_1(const Solution& sol) {
    // random selection of customers
        std::unordered_set<int> selectedCustomers;

        int numCustomersToRemove = getRandomNumber(10, 20);

        while (selectedCustomers.size() < numCustomersToRemove) {
            int randomCustomer = getRandomNumber(1, sol.instance.numCustomers);
            selectedCustomers.insert(randomCustomer);
        }

        return std::vector<int>(selectedCustomers.begin(), selectedCustomers.end());
}


// Function selecting the order in which to remove the customers
void sort_by_llm_1(std::vector<int>& customers, const Instance& instance) {
    // Placeholder for LLM-based sorting logic
    // This function should implement the logic to sort customers based on a learned model
    // For now, we will just sort randomly as a placeholder
    // sort_randomly(customers, instance);
    static thread_local std::mt19937 gen(std::random_device{}());
    std::shuffle(customers.begin(), customers.end(), gen);
}"""

# ---------------------------------------------------------------------------
# Runtime binding material (this package's Python operator interface).

PROBLEM_NAMES_LONG = {
    "cvrp": "Capacitated Vehicle Routing Problem (CVRP)",
    "vrptw": "Vehicle Routing Problem with Time Windows (VRPTW)",
    "pcvrp": "Prize-Collecting Vehicle Routing Problem (PCVRP)",
}

VRPTW_PROBLEM_DESC = """The Vehicle Routing Problem with Time Windows (VRPTW) involves determining a set of delivery routes from a depot to a group of customers, where each customer has a specific demand, a service duration, and a time window. Each vehicle has a fixed capacity. The objective is to design routes that minimize the total distance traveled, while ensuring that:
Each route starts and ends at the depot.
Each customer is visited exactly once by a single vehicle.
The total demand on any route does not exceed the vehicle capacity.
Service at every customer starts within that customer's time window; a vehicle arriving early waits until the window opens.

There is no limit on the number of vehicles that can be used."""

PCVRP_PROBLEM_DESC = """The Prize-Collecting Vehicle Routing Problem (PCVRP) involves determining a set of delivery routes from a depot to a group of customers, where each customer has a specific demand and a prize that is collected when the customer is served. Each vehicle has a fixed capacity. Not every customer has to be served: leaving a customer unserved forfeits its prize. The objective is to minimize the total distance traveled plus the sum of forfeited prizes, while ensuring that:
Each route starts and ends at the depot.
Each served customer is visited exactly once by a single vehicle.
The total demand on any route does not exceed the vehicle capacity.

There is no limit on the number of vehicles that can be used."""

PROBLEM_DESCS = {
    "cvrp": CVRP_PROBLEM_DESC,
    "vrptw": VRPTW_PROBLEM_DESC,
    "pcvrp": PCVRP_PROBLEM_DESC,
}

PY_LNS_HEADERS = """The framework is implemented in Python. Write plain Python (no imports are
needed; `math` and `np` for numpy are already in scope) defining exactly:

```python
def select_by_llm_1(sol):
    \"\"\"Return a list of customer ids to remove from their tours.\"\"\"

def sort_by_llm_1(customers, instance):
    \"\"\"Reorder the list of removed customer ids in place (or return a new list).\"\"\"
```

Available data:

```python
instance.num_customers   # number of customers (ids 1..num_customers; 0 is the depot)
instance.capacity        # vehicle capacity (identical for all vehicles)
instance.demand          # demand per node, demand[0] == 0
instance.dist            # dense distance matrix, dist[i][j]
instance.coords          # node positions in 2D space
instance.adjacency       # adjacency[i]: all other nodes sorted by distance from i
instance.prize           # prize per node (zero unless prize-collecting)
instance.tw_start, instance.tw_end, instance.service  # time windows (when present)

sol.instance             # the instance above
sol.total_objective      # objective of the current solution
sol.tours                # list of tours; tour.customers, tour.demand, tour.cost
sol.customer_to_tour     # customer id -> tour index (-1 when unassigned)
sol.unassigned           # set of currently unserved customer ids
```

Helper functions in scope:

```python
getRandomNumber(min, max)      # uniform int in [min, max]
getRandomFraction(min, max)    # uniform float in [min, max)
getRandomFractionFast()        # uniform float in [0, 1)
argsort(values)                # indices sorting a list of floats ascending
shuffle(items)                 # shuffle a list in place
```"""

PY_SEED_CODE = "```python\n" + SEED_SOURCE + "```"

# ---------------------------------------------------------------------------

TEMPLATE_IDS = (
    "system",
    "seed",
    "crossover",
    "mutation-ablation",
    "mutation-extend",
    "mutation-adjust",
    "mutation-refactor",
)

MUTATION_KINDS = (
    "mutation-ablation",
    "mutation-extend",
    "mutation-adjust",
    "mutation-refactor",
)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_bindings: frozenset[str]


_SYSTEM_SLOTS = frozenset({"problem_name_long", "problem_desc"})


def _template(tid: str, body: str, *slots: str) -> PromptTemplate:
    return PromptTemplate(tid, body, _SYSTEM_SLOTS | frozenset(slots))


TEMPLATES = {
    "system": _template("system", SYSTEM_BODY),
    "seed": _template("seed", SEED_BODY, "seed_code", "LNS_headers"),
    "crossover": _template("crossover", CROSSOVER_BODY, "code_parent_1", "code_parent_2", "bias_percent"),
    "crossover-standard": _template(
        "crossover-standard", CROSSOVER_STANDARD_BODY, "code_parent_1", "code_parent_2"
    ),
    "mutation-ablation": _template("mutation-ablation", MUTATION_ABLATION_BODY, "code"),
    "mutation-extend": _template("mutation-extend", MUTATION_EXTEND_BODY, "code"),
    "mutation-adjust": _template("mutation-adjust", MUTATION_ADJUST_BODY, "code"),
    "mutation-refactor": _template("mutation-refactor", MUTATION_REFACTOR_BODY, "code"),
}

_ALL_SLOTS = frozenset().union(*(t.required_bindings for t in TEMPLATES.values()))
_SLOT_RE = re.compile(r"\{([A-Za-z][A-Za-z0-9_]*)\}")


def _substitute(body: str, bindings: dict, tid: str) -> str:
    def repl(match):
        name = match.group(1)
        if name not in _ALL_SLOTS:
            return match.group(0)
        if name not in bindings:
            raise RenderError(f"template {tid!r} is missing binding {name!r}", slot=name)
        return str(bindings[name])

    rendered = _SLOT_RE.sub(repl, body)
    return rendered


def render(template_id: str, bindings: dict) -> list[dict]:
    """Render a template to chat messages (system context always first).

    Raises RenderError when a required binding is absent. Substitution only
    touches declared slot names, so braces inside bound code are inert.
    """
    try:
        template = TEMPLATES[template_id]
    except KeyError:
        raise RenderError(f"unknown template id {template_id!r}") from None
    for slot in sorted(template.required_bindings):
        if slot not in bindings:
            raise RenderError(f"template {template_id!r} is missing binding {slot!r}", slot=slot)
    messages = [{"role": "system", "content": _substitute(SYSTEM_BODY, bindings, "system")}]
    if template_id != "system":
        messages.append({"role": "user", "content": _substitute(template.body, bindings, template_id)})
    return messages


def prompt_digest(messages: list[dict]) -> str:
    """Stable digest of a rendered message list."""
    joined = "\x00".join(f"{m['role']}\n{m['content']}" for m in messages)
    return sha256_hex(joined)


def bias_percent_text(bias: float) -> str:
    return str(int(round(bias * 100)))


def reference_bindings(bias: float = 0.8) -> dict:
    """The original C++ interface material (digest/fidelity tests)."""
    return {
        "problem_name_long": PROBLEM_NAMES_LONG["cvrp"],
        "problem_desc": CVRP_PROBLEM_DESC,
        "seed_code": CPP_SEED_CODE,
        "LNS_headers": CPP_LNS_HEADERS,
        "code": CPP_SEED_CODE,
        "code_parent_1": CPP_SEED_CODE,
        "code_parent_2": CPP_SEED_CODE,
        "bias_percent": bias_percent_text(bias),
    }


def runtime_bindings(problem: str, bias: float = 0.8) -> dict:
    """Bindings for actual discovery runs against the Python interface."""
    key = problem.lower()
    return {
        "problem_name_long": PROBLEM_NAMES_LONG[key],
        "problem_desc": PROBLEM_DESCS[key],
        "seed_code": PY_SEED_CODE,
        "LNS_headers": PY_LNS_HEADERS,
        "bias_percent": bias_percent_text(bias),
    }
