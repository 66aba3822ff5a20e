import { ApiClient } from './api.js';
import { StudioApp } from './app.js';

const base = new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8000';
new StudioApp(document.getElementById('app') as HTMLElement, new ApiClient(base));
