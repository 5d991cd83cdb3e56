"""
Report Template Processor

Renders the plain-text run reports from jinja2 templates stored under
config/template/. Templates see only the variables the command passes in.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from jinja2 import BaseLoader, Environment, StrictUndefined, TemplateSyntaxError, UndefinedError

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent.parent / "config" / "template"


def format_float(value: Any, digits: int = 6) -> str:
    """Scientific notation for floats, plain text for everything else."""
    if isinstance(value, float):
        return f"{value:.{digits}e}"
    return str(value)


class SafeTemplateEnvironment:
    """
    Jinja2 environment for report templates.

    Undefined variables raise instead of rendering as empty text.
    """

    def __init__(self):
        self.env = Environment(
            loader=BaseLoader(),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )
        self.env.filters['sci'] = format_float

    def render_template(self, template_string: str, variables: Dict[str, Any]) -> str:
        """
        Render a template string with the given variables.

        Raises:
            TemplateSyntaxError: If template syntax is invalid
            UndefinedError: If the template uses a variable that was not supplied
        """
        try:
            template = self.env.from_string(template_string)
            return template.render(**variables)
        except TemplateSyntaxError as e:
            logger.error(f"Template syntax error: {e}")
            raise
        except UndefinedError as e:
            logger.error(f"Template variable missing: {e}")
            raise


def load_report_template(name: str, template_dir: Optional[Path] = None) -> str:
    """Read config/template/<name>.j2."""
    path = Path(template_dir or TEMPLATE_DIR) / f"{name}.j2"
    if not path.exists():
        raise FileNotFoundError(f"Report template not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return f.read()


def render_report(name: str, variables: Dict[str, Any], template_dir: Optional[Path] = None) -> str:
    """
    Render the named report template after checking its syntax.

    Raises:
        ValueError: If the template does not parse
    """
    template_string = load_report_template(name, template_dir)
    validation = validate_template_syntax(template_string)
    for warning in validation['warnings']:
        logger.warning(f"Report template {name}: {warning}")
    if validation['errors']:
        raise ValueError(f"Report template {name} is invalid: {'; '.join(validation['errors'])}")
    return SafeTemplateEnvironment().render_template(template_string, variables)


def validate_template_syntax(template_string: str) -> Dict[str, list]:
    """
    Validate template syntax without rendering.

    Returns:
        Dictionary with 'errors' and 'warnings' lists
    """
    errors = []
    warnings = []
    try:
        SafeTemplateEnvironment().env.parse(template_string)
    except TemplateSyntaxError as e:
        errors.append(f"Template syntax error at line {e.lineno}: {e.message}")
    if '{{' not in template_string and '{%' not in template_string:
        warnings.append("Template has no variables or statements")
    return {'errors': errors, 'warnings': warnings}
