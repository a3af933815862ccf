"""Hospital-university affiliation toolkit.

Registry of organizations and their component/associate relationships,
affiliation-string matching, publication counting with delta reports, and
a three-step assessment workflow with an event-sourced audit trail.
"""

__version__ = "0.1.0"
